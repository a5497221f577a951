// Wires the engine into the toy pipeline's injection points:
//   * every step asks the engine which prompt the sequence branch should use;
//   * even-offset attention reads are aggregated host-side and observed;
//   * the pooled embedding is swapped once per generation with the engine's
//     combined vector (skipped entirely at lambda_pool = 0);
//   * each block's attention output is routed through the engine's attribute
//     guidance (skipped at lambda_attr = 0 or when no attribute text exists).
//
// Zero weights disable the corresponding write instead of writing a no-op
// result, so a null configuration leaves the host bitwise untouched.

import { EngineBridgeClient, type ConceptMapDoc } from "./client.js";
import { decodeVector, encodeVector, type VectorPayload } from "./codec.js";
import { ToyPipeline, type PipelineHooks } from "./pipeline.js";

export interface AdapterOptions {
  plan: ConceptMapDoc;
  steps: number;
  tauS?: number;
  scheduler: "aps" | "r2f" | "none";
  r2fLevels?: number[];
  lambdaPool: number;
  lambdaAttr: number;
}

export interface TransitionRecord {
  t: number;
  slot: number;
}

export interface AdapterRunResult {
  latent: Float32Array;
  choices: number;
  observations: number;
  latentEdits: number;
  pooledSwapped: boolean;
  transitions: TransitionRecord[];
}

export class PipelineAdapter {
  constructor(
    private readonly client: EngineBridgeClient,
    private readonly pipeline: ToyPipeline,
    private readonly options: AdapterOptions,
  ) {}

  async run(): Promise<AdapterRunResult> {
    const { client, pipeline, options } = this;
    client.start();
    await client.hello();
    const configured = await client.configure({
      plan: options.plan,
      session: {
        T: options.steps,
        tau_s: options.tauS ?? 0.025,
        scheduler: options.scheduler,
        ...(options.r2fLevels ? { r2f_levels: options.r2fLevels } : {}),
      },
      pem: { lambda_pool: options.lambdaPool },
      lsm: { lambda_attr: options.lambdaAttr },
    });
    const m = configured.m as number;
    const targetText = configured.target_text as string;
    const frequentText = configured.frequent_text as string;

    let pooledOverride: Float32Array | null = null;
    if (options.lambdaPool > 0) {
      const reply = await client.pem(
        encodeVector(pipeline.embed(frequentText)),
        encodeVector(pipeline.embed(targetText)),
      );
      pooledOverride = decodeVector(reply.c_pool as VectorPayload);
    }

    const nullEmbedding = encodeVector(pipeline.embed(""));
    const result: AdapterRunResult = {
      latent: new Float32Array(0),
      choices: 0,
      observations: 0,
      latentEdits: 0,
      pooledSwapped: pooledOverride !== null,
      transitions: [],
    };
    let pTrans = 0;

    const hooks: PipelineHooks = {
      choosePrompt: async (t) => {
        const choice = await client.apsChoose(t);
        pTrans = choice.p_trans as number;
        result.choices++;
        return choice.text as string;
      },
      pooled: async () => pooledOverride,
      observeAttention: async (t, scores, labels) => {
        const reply = await client.apsObserve(t, scores, labels);
        result.observations++;
        const transition = reply.transition as { slot: number } | null;
        if (transition) {
          result.transitions.push({ t, slot: transition.slot });
          pTrans = (reply.p_trans as number) ?? pTrans;
        }
      },
    };
    if (options.lambdaAttr > 0 && m >= 1) {
      hooks.editAttentionOutput = async (_t, _block, output) => {
        const attrIndex = Math.min(pTrans + 1, m);
        const attrText = options.plan.pairs[attrIndex - 1]?.attribute ?? "";
        if (attrText === "") {
          return null;
        }
        const reply = await client.lsm(
          encodeVector(output),
          encodeVector(pipeline.embed(attrText)),
          nullEmbedding,
        );
        result.latentEdits++;
        return decodeVector(reply.l_hat as VectorPayload);
      };
    }

    result.latent = await pipeline.run(
      options.plan.original_prompt,
      options.steps,
      hooks,
    );
    await client.bye();
    return result;
  }
}
