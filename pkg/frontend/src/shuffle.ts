/** Deterministic left/right order for pairwise screens.
 *
 * Seeding from the assignment id keeps the layout reproducible for a
 * given assignment while looking random across assignments, so raters
 * cannot learn a fixed side for either system.
 */

// FNV-1a over the UTF-16 code units; stable across sessions.
export function hashString(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** True when response B should render on the left. */
export function swapSides(assignmentId: string): boolean {
  return hashString(assignmentId) % 2 === 1;
}
