// Records the golden protocol transcript: every request line sent to a live
// engine and the raw reply line it produced. The conformance test replays the
// sends and requires byte-identical replies. Regenerate (npm run gen-golden)
// only when the wire format or engine version intentionally changes.

import { writeFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { EngineBridgeClient } from "../src/client.js";
import { encodeFloat32Base64 } from "../src/codec.js";

const PLAN = {
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

const STEPS = 50;

// analytic per-token saturation curves, frozen to 6 decimals in the fixture;
// the slowest token (kappa=6) crosses tau_s=0.025 at offset 28, i.e. t=22,
// so the transcript exercises a transition and the locked state
const syntheticScores = (t: number): number[] => {
  const scores: number[] = [];
  for (let i = 0; i < 3; i++) {
    const kappa = 4 + i;
    const z = 0.02 + 0.5 * Math.exp(-(STEPS - t) / kappa);
    scores.push(Math.round(z * 1e6) / 1e6);
  }
  return scores;
};

const vec = (values: number[]): { b64: string } => ({
  b64: encodeFloat32Base64(new Float32Array(values)),
});

async function main(): Promise<void> {
  const client = new EngineBridgeClient();
  client.start();
  const records: string[] = [];
  let id = 1;

  const exchange = async (request: Record<string, unknown>): Promise<void> => {
    const line = JSON.stringify({ id: id++, ...request });
    const reply = await client.sendRaw(line);
    records.push(JSON.stringify({ send: line }));
    records.push(JSON.stringify({ recv: reply }));
  };

  await exchange({ op: "hello", version: 1 });
  await exchange({
    op: "configure",
    plan: PLAN,
    session: { T: STEPS, tau_s: 0.025, scheduler: "aps" },
    pem: { lambda_pool: 0.3 },
    lsm: { lambda_attr: 0.15 },
  });
  for (let t = STEPS; t >= 1; t--) {
    await exchange({ op: "aps_choose", t });
    if ((STEPS - t) % 2 === 0) {
      await exchange({
        op: "aps_observe",
        t,
        scores: syntheticScores(t),
        labels: ["a", "hairy", "frog"],
      });
    }
  }
  await exchange({
    op: "pem",
    c_f: vec([1.0, 0.1, -0.3, 0.7]),
    c_r: vec([1.0, 0.3, -0.1, 0.5]),
  });
  await exchange({
    op: "lsm",
    l_base: vec([0.5, -0.25, 0.125, 1.0]),
    l_attr: vec([1.0, 1.0, 0.0, 0.0]),
    l_null: vec([1.0, 0.0, 0.0, 0.0]),
  });
  await exchange({ op: "bye" });
  await client.close();

  const out = join(
    dirname(fileURLToPath(import.meta.url)),
    "..",
    "fixtures",
    "golden_transcript.ndjson",
  );
  writeFileSync(out, records.join("\n") + "\n");
  console.log(`wrote ${records.length / 2} exchanges to ${out}`);
}

main().catch((error) => {
  console.error(error);
  process.exit(1);
});
