import json

import httpx
import numpy as np
import pytest

from sciflow.errors import ConfigError, DocumentParseError, SchemaVersionError
from sciflow.graph import FlowDirection
from sciflow.providers import (
    ConstantImageText,
    IdentityPerceptual,
    ProviderRangeError,
    ProviderResponseError,
    ProviderTimeoutError,
    ProviderTransportError,
    RemoteConfig,
    RemoteEmbeddingProvider,
    RemoteJudgeProvider,
    RemotePerceptualProvider,
    TrigramEmbedder,
    constant_judge,
    cosine,
    is_unembeddable,
    load_perception_fixture,
    parse_perception_document,
)


class TestTrigramEmbedder:
    def test_deterministic(self):
        emb = TrigramEmbedder()
        first, second = emb.embed(["abc"]), emb.embed(["abc"])
        assert np.array_equal(first[0], second[0])

    def test_self_cosine_is_one(self):
        emb = TrigramEmbedder()
        vec = emb.embed(["encoder"])[0]
        assert cosine(vec, vec) == pytest.approx(1.0)

    def test_encoder_decoder_cosine_matches_hand_computation(self):
        # encoder -> {enc, nco, cod, ode, der}; decoder -> {dec, eco, cod,
        # ode, der}: 3 shared of 5 each, cosine 3/5
        emb = TrigramEmbedder()
        a, b = emb.embed(["encoder", "decoder"])
        assert cosine(a, b) == pytest.approx(0.6, abs=1e-12)

    def test_unit_norm(self):
        emb = TrigramEmbedder()
        for vec in emb.embed(["Attention Block", "x", "Residual"]):
            assert np.linalg.norm(vec) == pytest.approx(1.0)

    def test_empty_text_is_unembeddable_zero_vector(self):
        emb = TrigramEmbedder()
        vec = emb.embed([""])[0]
        assert is_unembeddable(vec)
        assert cosine(vec, emb.embed(["abc"])[0]) == 0.0

    def test_batch_permutation_permutes_output(self):
        emb = TrigramEmbedder()
        ab = emb.embed(["alpha", "beta"])
        ba = emb.embed(["beta", "alpha"])
        assert np.array_equal(ab[0], ba[1]) and np.array_equal(ab[1], ba[0])

    def test_case_and_punctuation_insensitive(self):
        emb = TrigramEmbedder()
        a, b = emb.embed(["Self-Attention", "self attention"])
        assert cosine(a, b) == pytest.approx(1.0)

    def test_stable_id(self):
        assert TrigramEmbedder(dim=256).id == "trigram-256"


class TestConstantProviders:
    def test_constant_judge(self):
        judge = constant_judge(0.5)
        assert judge.alignment("{}", "{}") == 0.5
        assert judge.flow(b"img", "{}") == 0.5

    def test_constant_judge_rejects_out_of_range(self):
        with pytest.raises(ConfigError):
            constant_judge(1.5)

    def test_constant_image_text(self):
        assert ConstantImageText(0.4).similarity(b"img", "text") == 0.4
        with pytest.raises(ConfigError):
            ConstantImageText(2.0)

    def test_identity_perceptual(self):
        p = IdentityPerceptual()
        assert p.distance(b"same", b"same") == 0.0
        assert p.distance(b"a", b"b") == 1.0


class TestPerceptionFixtures:
    def test_empty_fixture(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"schema_version": "sciflow-perception/1", "regions": [], "texts": [], "layout": null}')
        bundle = load_perception_fixture(path)
        assert bundle.regions == () and bundle.texts == () and bundle.layout is None

    def test_region_with_contained_text(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({
            "schema_version": "sciflow-perception/1",
            "regions": [{"bbox": [0.1, 0.1, 0.5, 0.5], "shape_class": "rect", "confidence": 0.9}],
            "texts": [{"bbox": [0.2, 0.2, 0.4, 0.3], "text": "Encoder", "confidence": 0.8}],
            "layout": {"flow_direction": "left_right", "figure_size": [640, 480]},
        }))
        bundle = load_perception_fixture(path)
        assert len(bundle.regions) == 1 and len(bundle.texts) == 1
        assert bundle.layout.flow_direction is FlowDirection.LEFT_RIGHT

    def test_corrupt_confidence_rejected_with_location(self):
        doc = {
            "schema_version": "sciflow-perception/1",
            "regions": [{"bbox": [0, 0, 1, 1], "shape_class": "rect", "confidence": 1.3}],
        }
        with pytest.raises(DocumentParseError, match=r"regions\[0\]\.confidence"):
            parse_perception_document(doc)

    def test_bad_bbox_rejected(self):
        doc = {"schema_version": "sciflow-perception/1", "texts": [{"bbox": [0.5, 0, 0.1, 1], "text": "x"}]}
        with pytest.raises(DocumentParseError, match=r"texts\[0\]\.bbox"):
            parse_perception_document(doc)

    def test_schema_version_checked(self):
        with pytest.raises(SchemaVersionError):
            parse_perception_document({"schema_version": "nope/1"})


def transport(handler):
    return httpx.MockTransport(handler)


def remote_config():
    return RemoteConfig(endpoint="http://provider.test", timeout_ms=500, retries=1)


class TestRemoteProviders:
    def test_well_formed_score_passes_through(self):
        def handler(request):
            return httpx.Response(200, json={"score": 0.73})

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        assert judge.alignment("{}", "{}") == 0.73

    def test_out_of_range_score_is_an_error_not_a_clamp(self):
        def handler(request):
            return httpx.Response(200, json={"score": 1.2})

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderRangeError):
            judge.alignment("{}", "{}")

    def test_timeout_exhausts_retries(self):
        calls = []

        def handler(request):
            calls.append(1)
            raise httpx.ConnectTimeout("boom")

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderTimeoutError):
            judge.flow(b"img", "{}")
        assert len(calls) == 2  # initial attempt + 1 retry

    def test_transport_error(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderTransportError):
            judge.alignment("{}", "{}")

    def test_http_error_status(self):
        def handler(request):
            return httpx.Response(500, text="oops")

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderTransportError, match="500"):
            judge.alignment("{}", "{}")

    def test_malformed_response(self):
        def handler(request):
            return httpx.Response(200, text="not json")

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderResponseError):
            judge.alignment("{}", "{}")

    def test_missing_key(self):
        def handler(request):
            return httpx.Response(200, json={"wrong": 1})

        judge = RemoteJudgeProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderResponseError, match="score"):
            judge.alignment("{}", "{}")

    def test_remote_embeddings_validated(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": [[3.0, 4.0]]})

        emb = RemoteEmbeddingProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderRangeError, match="norm"):
            emb.embed(["hello"])

    def test_remote_embeddings_pass(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": [[0.6, 0.8]]})

        emb = RemoteEmbeddingProvider(remote_config(), transport=transport(handler))
        vecs = emb.embed(["hello"])
        assert np.allclose(vecs[0], [0.6, 0.8])

    def test_remote_perceptual_rejects_negative(self):
        def handler(request):
            return httpx.Response(200, json={"distance": -0.2})

        prov = RemotePerceptualProvider(remote_config(), transport=transport(handler))
        with pytest.raises(ProviderRangeError):
            prov.distance(b"a", b"b")

    def test_invalid_remote_config(self):
        with pytest.raises(ConfigError):
            RemoteConfig(endpoint="http://x", timeout_ms=0)
        with pytest.raises(ConfigError):
            RemoteConfig(endpoint="http://x", retries=-1)

    def test_auth_token_read_from_named_env_var(self, monkeypatch):
        monkeypatch.setenv("PROVIDER_TOKEN", "sekrit")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"score": 0.5})

        config = RemoteConfig(endpoint="http://provider.test", auth_env="PROVIDER_TOKEN")
        judge = RemoteJudgeProvider(config, transport=transport(handler))
        judge.alignment("{}", "{}")
        assert seen["auth"] == "Bearer sekrit"
