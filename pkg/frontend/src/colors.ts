/** Status color encoding: a pure function of element state.
 * Inherited elements render blue while active, annotator additions render
 * magenta, excluded elements are muted and unselectable. */

export type Origin = 'inherited' | 'added';
export type Status = 'active' | 'excluded';

export interface UiElementState {
  id: string;
  origin: Origin;
  status: Status;
}

export type ColorClass = 'inherited' | 'added' | 'excluded';

export function colorClassFor(state: UiElementState): ColorClass {
  if (state.status === 'excluded') return 'excluded';
  return state.origin === 'added' ? 'added' : 'inherited';
}

export const COLOR_HEX: Record<ColorClass, string> = {
  inherited: '#2563eb', // blue
  added: '#d946ef', // magenta
  excluded: '#9ca3af', // muted grey
};

export function isSelectable(state: UiElementState): boolean {
  return state.status === 'active';
}
