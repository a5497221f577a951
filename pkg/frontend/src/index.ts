export {
  EngineBridgeClient,
  type BridgeReply,
  type ConceptMapDoc,
  type ConceptPairDoc,
  type ConfigureRequest,
  type SessionDoc,
} from "./client.js";
export {
  decodeFloat32Base64,
  decodeVector,
  encodeFloat32Base64,
  encodeVector,
  type VectorPayload,
} from "./codec.js";
export { ToyPipeline, type PipelineHooks, type ToyPipelineOptions } from "./pipeline.js";
export {
  PipelineAdapter,
  type AdapterOptions,
  type AdapterRunResult,
  type TransitionRecord,
} from "./adapter.js";
