// Null-op equivalence: adapter with scheduler "none" and zero weights must
// reproduce the unhooked pipeline bitwise; a live configuration must not.

import { describe, expect, it } from "vitest";

import { PipelineAdapter } from "../src/adapter.js";
import { EngineBridgeClient, type ConceptMapDoc } from "../src/client.js";
import { ToyPipeline } from "../src/pipeline.js";

const PLAN: ConceptMapDoc = {
  original_prompt: "A hairy frog",
  pairs: [
    {
      index: 1,
      rare: "A hairy frog",
      frequent: "A hairy animal",
      attribute: "a hairy",
    },
  ],
};

const TRIVIAL_PLAN: ConceptMapDoc = {
  original_prompt: "A red apple",
  pairs: [],
};

const STEPS = 50;

const bitwiseEqual = (a: Float32Array, b: Float32Array): boolean =>
  a.length === b.length &&
  Buffer.compare(Buffer.from(a.buffer), Buffer.from(b.buffer)) === 0;

describe("null-op equivalence", () => {
  it("scheduler none with zero weights matches the unhooked pipeline bitwise", async () => {
    const baseline = await new ToyPipeline().run(PLAN.original_prompt, STEPS);
    const adapter = new PipelineAdapter(new EngineBridgeClient(), new ToyPipeline(), {
      plan: PLAN,
      steps: STEPS,
      scheduler: "none",
      lambdaPool: 0,
      lambdaAttr: 0,
    });
    const result = await adapter.run();
    expect(result.choices).toBe(STEPS);
    expect(result.observations).toBe(STEPS / 2);
    expect(result.latentEdits).toBe(0);
    expect(result.pooledSwapped).toBe(false);
    expect(result.transitions).toEqual([]);
    expect(bitwiseEqual(result.latent, baseline)).toBe(true);
  });

  it("holds for a concept-free plan too", async () => {
    const baseline = await new ToyPipeline().run(TRIVIAL_PLAN.original_prompt, STEPS);
    const adapter = new PipelineAdapter(new EngineBridgeClient(), new ToyPipeline(), {
      plan: TRIVIAL_PLAN,
      steps: STEPS,
      scheduler: "none",
      lambdaPool: 0,
      lambdaAttr: 0,
    });
    const result = await adapter.run();
    expect(bitwiseEqual(result.latent, baseline)).toBe(true);
  });

  it("an active configuration diverges (equivalence is not vacuous)", async () => {
    const baseline = await new ToyPipeline().run(PLAN.original_prompt, STEPS);
    const adapter = new PipelineAdapter(new EngineBridgeClient(), new ToyPipeline(), {
      plan: PLAN,
      steps: STEPS,
      scheduler: "aps",
      tauS: 0.025,
      lambdaPool: 0.3,
      lambdaAttr: 0.15,
    });
    const result = await adapter.run();
    expect(result.pooledSwapped).toBe(true);
    expect(result.latentEdits).toBeGreaterThan(0);
    expect(bitwiseEqual(result.latent, baseline)).toBe(false);
  });

  it("deterministic: two identical adapter runs agree bitwise", async () => {
    const make = () =>
      new PipelineAdapter(new EngineBridgeClient(), new ToyPipeline(), {
        plan: PLAN,
        steps: STEPS,
        scheduler: "aps",
        tauS: 0.025,
        lambdaPool: 0.3,
        lambdaAttr: 0.15,
      });
    const first = await make().run();
    const second = await make().run();
    expect(bitwiseEqual(first.latent, second.latent)).toBe(true);
    expect(first.transitions).toEqual(second.transitions);
  });
});
