/** Session store: element states, staged edits, cascade previews.
 *
 * Edits stage locally and submit in batches with the item's version token,
 * so a dropped connection never loses work and stale submissions are
 * rejected by the server rather than clobbering another session. */

import { colorClassFor, type ColorClass, type UiElementState } from './colors.js';
import type { EdgeDoc, EditDoc, ItemDetail, NodeDoc } from './types.js';

export type Mode = 'select_delete' | 'link_nodes';

export interface StagedCounts {
  removed_nodes: number;
  removed_edges: number;
  added_nodes: number;
  added_edges: number;
}

export interface LinkResult {
  ok: boolean;
  /** Inline message when the link is blocked (e.g. endpoint excluded). */
  message?: string;
  edgeId?: string;
}

interface StagedExclusion {
  kind: 'exclude_node' | 'exclude_edge';
  targetId: string;
}

interface StagedAddition {
  kind: 'add_node' | 'add_edge';
  node?: NodeDoc;
  edge?: EdgeDoc;
}

type Staged = StagedExclusion | StagedAddition;

export class VerificationSession {
  readonly itemId: string;
  version: number;
  mode: Mode = 'select_delete';
  annotator: string;

  private nodes = new Map<string, NodeDoc>();
  private edges = new Map<string, EdgeDoc>();
  private states = new Map<string, UiElementState>();
  private staged: Staged[] = [];
  private linkSource: string | null = null;
  private freshCounter = 0;
  private committed: StagedCounts;

  constructor(detail: ItemDetail, annotator = 'annotator') {
    this.itemId = detail.item_id;
    this.version = detail.version;
    this.annotator = annotator;
    this.committed = { ...detail.log.summary };
    for (const node of detail.verified_graph.nodes) {
      this.nodes.set(node.id, node);
      this.states.set(node.id, {
        id: node.id,
        origin: node.human_added ? 'added' : 'inherited',
        status: 'active',
      });
    }
    for (const edge of detail.verified_graph.edges) {
      this.edges.set(edge.id, edge);
      this.states.set(edge.id, {
        id: edge.id,
        origin: edge.human_added ? 'added' : 'inherited',
        status: 'active',
      });
    }
  }

  // --- element access -------------------------------------------------------

  nodeIds(): string[] {
    return [...this.nodes.keys()];
  }

  edgeIds(): string[] {
    return [...this.edges.keys()];
  }

  node(id: string): NodeDoc | undefined {
    return this.nodes.get(id);
  }

  edge(id: string): EdgeDoc | undefined {
    return this.edges.get(id);
  }

  stateOf(id: string): UiElementState {
    const state = this.states.get(id);
    if (!state) throw new Error(`unknown element ${id}`);
    return state;
  }

  colorOf(id: string): ColorClass {
    return colorClassFor(this.stateOf(id));
  }

  /** Edges muted when this node's exclusion is staged (cascade preview). */
  cascadePreview(nodeId: string): string[] {
    return [...this.edges.values()]
      .filter((e) => e.source === nodeId || e.target === nodeId)
      .filter((e) => this.stateOf(e.id).status === 'active' || this.isStagedExclusion(e.id))
      .map((e) => e.id);
  }

  private isStagedExclusion(id: string): boolean {
    return this.staged.some((s) => 'targetId' in s && s.targetId === id);
  }

  private isStagedAddition(id: string): boolean {
    return this.staged.some(
      (s) => !('targetId' in s) && ((s.node && s.node.id === id) || (s.edge && s.edge.id === id)),
    );
  }

  // --- select/delete mode -----------------------------------------------------

  /** Stage an exclusion, or unstage on re-click. Staged additions un-stage
   * entirely (the element disappears again). Returns the new status of the
   * element, or an error message for protocol violations. */
  toggleExclude(id: string): { status: 'staged' | 'unstaged'; message?: string } {
    const state = this.states.get(id);
    if (!state) return { status: 'unstaged', message: `unknown element ${id}` };

    if (this.isStagedAddition(id)) {
      // re-click on a staged (not yet submitted) addition removes it outright
      this.staged = this.staged.filter(
        (s) => 'targetId' in s || (s.node?.id !== id && s.edge?.id !== id),
      );
      this.dropElement(id);
      return { status: 'unstaged' };
    }

    if (state.origin === 'added') {
      return {
        status: 'unstaged',
        message: 'submitted additions cannot be excluded from this panel',
      };
    }

    if (state.status === 'excluded') {
      // unstage: restore the element and any cascade-muted edges
      this.staged = this.staged.filter((s) => !('targetId' in s) || s.targetId !== id);
      state.status = 'active';
      if (this.nodes.has(id)) {
        for (const edgeId of this.cascadeMutedBy(id)) {
          const edgeState = this.stateOf(edgeId);
          if (!this.isStagedExclusion(edgeId)) edgeState.status = 'active';
        }
      }
      return { status: 'unstaged' };
    }

    const kind = this.nodes.has(id) ? 'exclude_node' : 'exclude_edge';
    this.staged.push({ kind, targetId: id });
    state.status = 'excluded';
    if (kind === 'exclude_node') {
      for (const edgeId of this.cascadePreview(id)) {
        this.stateOf(edgeId).status = 'excluded';
      }
    }
    return { status: 'staged' };
  }

  private cascadeMutedBy(nodeId: string): string[] {
    return [...this.edges.values()]
      .filter((e) => e.source === nodeId || e.target === nodeId)
      .map((e) => e.id);
  }

  // --- additions ---------------------------------------------------------------

  stageAddNode(label: string): string {
    const id = this.freshId('node');
    const node: NodeDoc = { id, label, node_type: 'unknown', bbox: null, human_added: true };
    this.nodes.set(id, node);
    this.states.set(id, { id, origin: 'added', status: 'active' });
    this.staged.push({ kind: 'add_node', node });
    return id;
  }

  /** Link Nodes Mode: first click picks the source, second the target. */
  clickNodeForLink(nodeId: string): LinkResult {
    const state = this.states.get(nodeId);
    if (!state || !this.nodes.has(nodeId)) return { ok: false, message: `unknown node ${nodeId}` };
    if (state.status === 'excluded') {
      return { ok: false, message: 'cannot link to an excluded node' };
    }
    if (this.linkSource === null) {
      this.linkSource = nodeId;
      return { ok: true };
    }
    const source = this.linkSource;
    this.linkSource = null;
    if (source === nodeId) return { ok: false, message: 'source and target must differ' };
    const id = this.freshId('edge');
    const edge: EdgeDoc = { id, source, target: nodeId, directed: true, human_added: true };
    this.edges.set(id, edge);
    this.states.set(id, { id, origin: 'added', status: 'active' });
    this.staged.push({ kind: 'add_edge', edge });
    return { ok: true, edgeId: id };
  }

  get pendingLinkSource(): string | null {
    return this.linkSource;
  }

  private freshId(kind: string): string {
    this.freshCounter += 1;
    return `ui-${this.itemId}-${kind}-${this.version}-${this.freshCounter}`;
  }

  private dropElement(id: string): void {
    this.nodes.delete(id);
    this.edges.delete(id);
    this.states.delete(id);
  }

  // --- panel -------------------------------------------------------------------

  /** Search by identifier or label substring (case-insensitive). */
  search(query: string): string[] {
    const needle = query.toLowerCase();
    const hits: string[] = [];
    for (const node of this.nodes.values()) {
      if (node.id.toLowerCase().includes(needle) || node.label.toLowerCase().includes(needle)) {
        hits.push(node.id);
      }
    }
    for (const edge of this.edges.values()) {
      if (edge.id.toLowerCase().includes(needle)) hits.push(edge.id);
    }
    return hits.sort();
  }

  /** Batch operation: exclude every (active, inherited) element in the list. */
  batchExclude(ids: string[]): number {
    let staged = 0;
    for (const id of ids) {
      const state = this.states.get(id);
      if (!state || state.origin !== 'inherited' || state.status !== 'active') continue;
      this.toggleExclude(id);
      staged += 1;
    }
    return staged;
  }

  stagedCounts(): StagedCounts {
    const counts: StagedCounts = { removed_nodes: 0, removed_edges: 0, added_nodes: 0, added_edges: 0 };
    for (const entry of this.staged) {
      if (entry.kind === 'exclude_node') {
        counts.removed_nodes += 1;
        // cascade preview counts toward removals the server will log
        counts.removed_edges += this.cascadeTargets(entry.targetId).length;
      } else if (entry.kind === 'exclude_edge') {
        counts.removed_edges += 1;
      } else if (entry.kind === 'add_node') {
        counts.added_nodes += 1;
      } else {
        counts.added_edges += 1;
      }
    }
    return counts;
  }

  private cascadeTargets(nodeId: string): string[] {
    return [...this.edges.values()]
      .filter((e) => e.source === nodeId || e.target === nodeId)
      .filter((e) => !this.isStagedExclusion(e.id))
      .map((e) => e.id);
  }

  /** Staged plus already-committed counts, shown in the control panel. */
  totalCounts(): StagedCounts {
    const staged = this.stagedCounts();
    return {
      removed_nodes: staged.removed_nodes + this.committed.removed_nodes,
      removed_edges: staged.removed_edges + this.committed.removed_edges,
      added_nodes: staged.added_nodes + this.committed.added_nodes,
      added_edges: staged.added_edges + this.committed.added_edges,
    };
  }

  get stagedCount(): number {
    return this.staged.length;
  }

  // --- submission -----------------------------------------------------------------

  /** Serialize staged edits in order; only the four allowed kinds appear. */
  buildEditBatch(now: () => number = Date.now): EditDoc[] {
    return this.staged.map((entry, index) => {
      const doc: EditDoc = {
        edit_id: `ui-${this.itemId}-v${this.version}-${index}`,
        kind: entry.kind,
        annotator: this.annotator,
        timestamp: now() / 1000,
      };
      if ('targetId' in entry) {
        doc.target_id = entry.targetId;
      } else if (entry.node) {
        doc.node = entry.node;
      } else if (entry.edge) {
        doc.edge = entry.edge;
      }
      return doc;
    });
  }

  /** Called after a successful submit; staged edits become committed. */
  markSubmitted(newVersion: number): void {
    this.committed = this.totalCounts();
    this.staged = [];
    this.version = newVersion;
  }

  /** Version conflict: staged edits survive; caller reloads the item and
   * rebuilds a session, then re-stages from this list. */
  takeStagedForRecovery(): EditDoc[] {
    return this.buildEditBatch();
  }
}
