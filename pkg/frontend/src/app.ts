/** Browser wiring: synchronized dual view (figure beside editable graph
 * canvas), the two interaction modes, control panel, and live agreement. */

import { AnnotationApi, ApiError } from './api.js';
import { COLOR_HEX, isSelectable } from './colors.js';
import { VerificationSession, type Mode } from './state.js';
import type { EditDoc, ItemDetail, NodeDoc } from './types.js';

const SERVICE_URL = new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8400';

function el<K extends keyof HTMLElementTagNameMap>(tag: K, cls?: string, text?: string) {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

class App {
  private api = new AnnotationApi(SERVICE_URL);
  private session: VerificationSession | null = null;
  private detail: ItemDetail | null = null;
  private recovered: EditDoc[] = [];

  private root = document.getElementById('app')!;
  private status = el('div', 'status');

  async start(): Promise<void> {
    this.root.append(this.status);
    try {
      const items = await this.api.listItems();
      this.renderItemList(items.map((i) => i.item_id));
    } catch (error) {
      this.setStatus(`service unreachable: ${String(error)}`, true);
    }
  }

  private setStatus(message: string, isError = false): void {
    this.status.textContent = message;
    this.status.classList.toggle('error', isError);
  }

  private renderItemList(itemIds: string[]): void {
    const list = el('div', 'item-list');
    list.append(el('h2', undefined, 'Items'));
    for (const itemId of itemIds) {
      const button = el('button', 'item-button', itemId);
      button.addEventListener('click', () => void this.loadItem(itemId));
      list.append(button);
    }
    this.root.append(list);
  }

  async loadItem(itemId: string): Promise<void> {
    try {
      this.detail = await this.api.getItem(itemId);
    } catch (error) {
      this.setStatus(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error), true);
      return;
    }
    this.session = new VerificationSession(this.detail);
    // a conflict reload re-stages the surviving local edits
    for (const edit of this.recovered) this.restage(edit);
    this.recovered = [];
    this.renderWorkspace();
    await this.refreshAgreement();
  }

  private restage(edit: EditDoc): void {
    const session = this.session!;
    if (edit.kind === 'exclude_node' || edit.kind === 'exclude_edge') {
      if (edit.target_id) session.toggleExclude(edit.target_id);
    } else if (edit.kind === 'add_node' && edit.node) {
      session.stageAddNode(edit.node.label);
    } else if (edit.kind === 'add_edge' && edit.edge) {
      session.clickNodeForLink(edit.edge.source);
      session.clickNodeForLink(edit.edge.target);
    }
  }

  private renderWorkspace(): void {
    const detail = this.detail!;
    document.querySelectorAll('.workspace').forEach((n) => n.remove());
    const workspace = el('div', 'workspace');

    // figure pane
    const figurePane = el('div', 'figure-pane');
    if (detail.figure) {
      const img = el('img') as HTMLImageElement;
      img.src = `data:${detail.figure.media_type};base64,${detail.figure.base64}`;
      figurePane.append(img);
    } else {
      figurePane.append(el('p', 'muted', 'no figure attached'));
    }
    const highlight = el('div', 'bbox-highlight');
    figurePane.append(highlight);

    // graph canvas
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('viewBox', '0 0 1000 700');
    svg.classList.add('graph-canvas');
    this.renderGraph(svg, highlight);

    // control panel
    const panel = this.renderPanel();

    workspace.append(figurePane, svg, panel);
    this.root.append(workspace);
  }

  private nodePosition(node: NodeDoc, index: number, total: number): { x: number; y: number } {
    if (node.bbox) {
      const [x0, y0, x1, y1] = node.bbox;
      return { x: ((x0 + x1) / 2) * 1000, y: ((y0 + y1) / 2) * 700 };
    }
    const columns = Math.ceil(Math.sqrt(total));
    return { x: 100 + (index % columns) * 180, y: 80 + Math.floor(index / columns) * 120 };
  }

  private renderGraph(svg: SVGSVGElement, highlight: HTMLElement): void {
    const session = this.session!;
    svg.replaceChildren();
    const nodeIds = session.nodeIds();
    const positions = new Map<string, { x: number; y: number }>();
    nodeIds.forEach((id, index) => {
      positions.set(id, this.nodePosition(session.node(id)!, index, nodeIds.length));
    });

    for (const edgeId of session.edgeIds()) {
      const edge = session.edge(edgeId)!;
      const from = positions.get(edge.source);
      const to = positions.get(edge.target);
      if (!from || !to) continue;
      const line = document.createElementNS('http://www.w3.org/2000/svg', 'line');
      line.setAttribute('x1', String(from.x));
      line.setAttribute('y1', String(from.y));
      line.setAttribute('x2', String(to.x));
      line.setAttribute('y2', String(to.y));
      line.setAttribute('stroke', COLOR_HEX[session.colorOf(edgeId)]);
      line.setAttribute('stroke-width', '2');
      line.setAttribute('marker-end', 'url(#arrow)');
      line.addEventListener('click', () => this.onElementClick(edgeId, highlight));
      svg.append(line);
    }

    for (const nodeId of nodeIds) {
      const node = session.node(nodeId)!;
      const pos = positions.get(nodeId)!;
      const group = document.createElementNS('http://www.w3.org/2000/svg', 'g');
      const rect = document.createElementNS('http://www.w3.org/2000/svg', 'rect');
      rect.setAttribute('x', String(pos.x - 70));
      rect.setAttribute('y', String(pos.y - 22));
      rect.setAttribute('width', '140');
      rect.setAttribute('height', '44');
      rect.setAttribute('rx', '6');
      rect.setAttribute('fill', COLOR_HEX[session.colorOf(nodeId)]);
      const caption = document.createElementNS('http://www.w3.org/2000/svg', 'text');
      caption.setAttribute('x', String(pos.x));
      caption.setAttribute('y', String(pos.y + 5));
      caption.setAttribute('text-anchor', 'middle');
      caption.setAttribute('fill', '#ffffff');
      caption.textContent = node.label || node.id;
      group.append(rect, caption);
      group.addEventListener('click', () => this.onElementClick(nodeId, highlight));
      svg.append(group);
    }
  }

  private onElementClick(elementId: string, highlight: HTMLElement): void {
    const session = this.session!;
    const state = session.stateOf(elementId);
    if (!isSelectable(state) && session.mode === 'link_nodes') return;

    const node = session.node(elementId);
    if (node?.bbox) {
      const [x0, y0, x1, y1] = node.bbox;
      highlight.style.left = `${x0 * 100}%`;
      highlight.style.top = `${y0 * 100}%`;
      highlight.style.width = `${(x1 - x0) * 100}%`;
      highlight.style.height = `${(y1 - y0) * 100}%`;
      highlight.style.display = 'block';
    }

    if (session.mode === 'select_delete') {
      const result = session.toggleExclude(elementId);
      if (result.message) this.setStatus(result.message, true);
    } else if (node) {
      const result = session.clickNodeForLink(elementId);
      if (!result.ok && result.message) this.setStatus(result.message, true);
    }
    this.renderWorkspace();
  }

  private renderPanel(): HTMLElement {
    const session = this.session!;
    const panel = el('div', 'panel');

    const modes = el('div', 'modes');
    for (const mode of ['select_delete', 'link_nodes'] as Mode[]) {
      const button = el('button', mode === session.mode ? 'mode active' : 'mode', mode.replace('_', '/'));
      button.addEventListener('click', () => {
        session.mode = mode;
        this.renderWorkspace();
      });
      modes.append(button);
    }
    panel.append(modes);

    const addNode = el('button', 'add-node', 'add node');
    addNode.addEventListener('click', () => {
      const label = prompt('label for the missing component') ?? '';
      if (label) {
        session.stageAddNode(label);
        this.renderWorkspace();
      }
    });
    panel.append(addNode);

    const search = el('input') as HTMLInputElement;
    search.placeholder = 'search id or description';
    const searchResults = el('div', 'search-results');
    const batch = el('button', undefined, 'exclude all matches');
    batch.addEventListener('click', () => {
      session.batchExclude(session.search(search.value));
      this.renderWorkspace();
    });
    search.addEventListener('input', () => {
      searchResults.replaceChildren(...session.search(search.value).map((id) => el('div', 'hit', id)));
    });
    panel.append(search, batch, searchResults);

    const counts = session.totalCounts();
    panel.append(
      el(
        'div',
        'counts',
        `removed ${counts.removed_nodes}n/${counts.removed_edges}e · added ${counts.added_nodes}n/${counts.added_edges}e`,
      ),
    );

    const submit = el('button', 'submit', `submit ${session.stagedCount} staged edit(s)`);
    submit.addEventListener('click', () => void this.submit());
    panel.append(submit);

    const agreementPanel = el('div', 'agreement');
    agreementPanel.id = 'agreement-panel';
    panel.append(agreementPanel);
    return panel;
  }

  private async submit(): Promise<void> {
    const session = this.session!;
    const batch = session.buildEditBatch();
    try {
      const result = await this.api.submitEdits(session.itemId, session.version, batch);
      session.markSubmitted(result.version);
      this.setStatus(`applied ${result.applied.length} edit(s)`);
      await this.loadItem(session.itemId);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // keep staged edits, prompt a reload
        this.recovered = session.takeStagedForRecovery();
        this.setStatus('another session updated this item; reloading with your staged edits', true);
        await this.loadItem(session.itemId);
      } else {
        this.setStatus(String(error), true);
      }
    }
  }

  private async refreshAgreement(): Promise<void> {
    const session = this.session!;
    const panel = document.getElementById('agreement-panel');
    if (!panel) return;
    const report = await this.api.getAgreement(session.itemId);
    panel.replaceChildren(
      el('h3', undefined, 'Agreement'),
      el('div', undefined, `node P ${report.node_precision.toFixed(2)} R ${report.node_recall.toFixed(2)} F1 ${report.node_f1.toFixed(2)}`),
      el('div', undefined, `edge P ${report.edge_precision.toFixed(2)} R ${report.edge_recall.toFixed(2)} F1 ${report.edge_f1.toFixed(2)}`),
    );
  }
}

new App().start();
