// The live suggestion loop on the create-event form: edits to the tags field
// debounce-fire the three suggestion endpoints; results render as clickable
// rankings and clearing the tags empties the panels without a request.

import type { ApiClient } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import type { SuggestionPanels } from "./state.js";

export const SUGGEST_DEBOUNCE_MS = 300;

export type SuggestFetcher = Pick<ApiClient, "suggestTime" | "suggestDate" | "suggestPlaces">;

export class SuggestionLoop {
  private readonly run: Debounced<[string[]]>;
  private generation = 0;

  constructor(
    private api: SuggestFetcher,
    private onUpdate: (panels: SuggestionPanels) => void,
    waitMs: number = SUGGEST_DEBOUNCE_MS,
  ) {
    this.run = debounce((tags: string[]) => void this.fire(tags), waitMs);
  }

  /** Call on every edit of the tags field. */
  setTags(tags: string[]): void {
    if (tags.length === 0) {
      this.run.cancel();
      this.generation += 1;
      this.onUpdate({ time: [], date: [], places: [] });
      return;
    }
    this.run(tags);
  }

  stop(): void {
    this.run.cancel();
    this.generation += 1;
  }

  private async fire(tags: string[]): Promise<void> {
    const generation = ++this.generation;
    try {
      const [time, date, places] = await Promise.all([
        this.api.suggestTime(tags),
        this.api.suggestDate(tags),
        this.api.suggestPlaces(tags),
      ]);
      if (generation !== this.generation) return; // a newer edit superseded us
      this.onUpdate({ time: time.items, date: date.items, places: places.items });
    } catch {
      if (generation === this.generation) {
        this.onUpdate({ time: [], date: [], places: [] });
      }
    }
  }
}
