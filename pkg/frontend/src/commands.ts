// One button, one command document: the mapping is 1:1 with no batching
// or synthesis, so the service log mirrors operator intent exactly.

import { CommandDoc } from "./types.js";

export type ButtonId =
  | "step"
  | "run"
  | "pause"
  | "crash"
  | "force-short"
  | "remove-vis";

export function commandForButton(
  button: ButtonId,
  options: { stepTicks?: number; runRate?: number } = {},
): CommandDoc {
  switch (button) {
    case "step":
      return { verb: "step", n: options.stepTicks ?? 100 };
    case "run":
      return { verb: "run", rate: options.runRate ?? 50 };
    case "pause":
      return { verb: "pause" };
    case "crash":
      return { verb: "crash" };
    case "force-short":
      return { verb: "force_short" };
    case "remove-vis":
      return { verb: "remove_value_investors" };
  }
}

export const ALL_BUTTONS: ButtonId[] = [
  "step",
  "run",
  "pause",
  "crash",
  "force-short",
  "remove-vis",
];
