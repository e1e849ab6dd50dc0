import { describe, expect, it } from 'vitest';

import { COLOR_HEX, colorClassFor, isSelectable } from '../src/colors.js';

describe('color encoding', () => {
  it('is a pure function of element state', () => {
    expect(colorClassFor({ id: 'x', origin: 'inherited', status: 'active' })).toBe('inherited');
    expect(colorClassFor({ id: 'x', origin: 'added', status: 'active' })).toBe('added');
    expect(colorClassFor({ id: 'x', origin: 'inherited', status: 'excluded' })).toBe('excluded');
    expect(colorClassFor({ id: 'x', origin: 'added', status: 'excluded' })).toBe('excluded');
  });

  it('maps classes to the blue/magenta/muted scheme', () => {
    expect(COLOR_HEX.inherited).toBe('#2563eb');
    expect(COLOR_HEX.added).toBe('#d946ef');
    expect(COLOR_HEX.excluded).toBe('#9ca3af');
  });

  it('excluded elements are unselectable', () => {
    expect(isSelectable({ id: 'x', origin: 'inherited', status: 'excluded' })).toBe(false);
    expect(isSelectable({ id: 'x', origin: 'added', status: 'active' })).toBe(true);
  });
});
