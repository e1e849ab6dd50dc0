/** Wire formats of the annotation service API (the only backend surface). */

export interface NodeDoc {
  id: string;
  label: string;
  node_type: string;
  bbox: [number, number, number, number] | null;
  human_added: boolean;
}

export interface EdgeDoc {
  id: string;
  source: string;
  target: string;
  directed: boolean;
  human_added: boolean;
}

export interface GroupDoc {
  id: string;
  label: string;
  members: string[];
  parent: string | null;
}

export interface GraphDoc {
  schema_version: string;
  graph_id: string;
  provenance: string;
  nodes: NodeDoc[];
  edges: EdgeDoc[];
  groups: GroupDoc[];
  layout: unknown;
}

/** The UI only ever issues these four edit kinds; renames and wholesale
 * restructuring are not part of the verification protocol. */
export type EditKind = 'exclude_node' | 'exclude_edge' | 'add_node' | 'add_edge';

export interface EditDoc {
  edit_id: string;
  kind: EditKind;
  target_id?: string | null;
  node?: NodeDoc | null;
  edge?: EdgeDoc | null;
  annotator: string;
  timestamp: number;
}

export interface LogEntryDoc extends Omit<EditDoc, 'kind'> {
  kind: string; // server logs may carry cascade/retract entries
  cascade_of?: string | null;
}

export interface LogDoc {
  graph_id: string;
  entries: LogEntryDoc[];
  summary: {
    removed_nodes: number;
    removed_edges: number;
    added_nodes: number;
    added_edges: number;
  };
  total_time: number;
}

export interface ItemSummary {
  item_id: string;
  graph_id: string;
  node_count: number;
  edge_count: number;
  version: number;
}

export interface FigurePayload {
  media_type: string;
  base64: string;
}

export interface ItemDetail {
  item_id: string;
  version: number;
  figure: FigurePayload | null;
  auto_graph: GraphDoc;
  verified_graph: GraphDoc;
  log: LogDoc;
}

export interface AgreementCountsDoc {
  retained: number;
  removed: number;
  added: number;
}

export interface AgreementDoc {
  node_precision: number;
  node_recall: number;
  node_f1: number;
  edge_precision: number;
  edge_recall: number;
  edge_f1: number;
  node_counts: AgreementCountsDoc;
  edge_counts: AgreementCountsDoc;
}

export interface SubmitResult {
  version: number;
  applied: string[];
}
