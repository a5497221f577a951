// Subprocess client for the engine's line-oriented stdio protocol.
//
// The protocol is strict request-reply in order, so pending resolvers form a
// queue: each stdout line settles the oldest outstanding request.

import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable, Writable } from "node:stream";

import { type VectorPayload } from "./codec.js";

type EngineProcess = ChildProcessByStdio<Writable, Readable, null>;

export interface ErrorReply {
  code: string;
  message: string;
}

export interface BridgeReply {
  id: number | null;
  op?: string;
  error?: ErrorReply;
  [key: string]: unknown;
}

export interface ConceptPairDoc {
  index: number;
  rare: string;
  frequent: string;
  attribute: string;
}

export interface ConceptMapDoc {
  original_prompt: string;
  pairs: ConceptPairDoc[];
}

export interface SessionDoc {
  T: number;
  tau_s?: number;
  scheduler: "aps" | "r2f" | "none";
  transition_order?: "index" | "saturation";
  r2f_levels?: number[];
}

export interface ConfigureRequest {
  plan: ConceptMapDoc;
  session: SessionDoc;
  pem?: { lambda_pool?: number; s?: number; p?: number; epsilon?: number };
  lsm?: { lambda_attr?: number };
}

const defaultCommand = (): string[] => {
  const fromEnv = process.env.ADAPT_ENGINE_CMD;
  if (fromEnv && fromEnv.trim() !== "") {
    return fromEnv.split(" ");
  }
  return ["python3", "-m", "adapt.cli", "bridge"];
};

export class EngineBridgeClient {
  private proc: EngineProcess | null = null;
  private nextId = 1;
  private buffer = "";
  private pending: Array<(line: string) => void> = [];

  constructor(private readonly command: string[] = defaultCommand()) {}

  start(): void {
    if (this.proc) return;
    const [cmd, ...args] = this.command;
    const proc = spawn(cmd, args, { stdio: ["pipe", "pipe", "inherit"] });
    proc.stdout.setEncoding("utf8");
    proc.stdout.on("data", (chunk: string) => {
      this.buffer += chunk;
      let newline = this.buffer.indexOf("\n");
      while (newline >= 0) {
        const line = this.buffer.slice(0, newline);
        this.buffer = this.buffer.slice(newline + 1);
        const resolve = this.pending.shift();
        if (resolve) resolve(line);
        newline = this.buffer.indexOf("\n");
      }
    });
    this.proc = proc;
  }

  /** Send one raw line and await the engine's raw reply line. */
  sendRaw(line: string): Promise<string> {
    if (!this.proc) throw new Error("client not started");
    const reply = new Promise<string>((resolve) => this.pending.push(resolve));
    this.proc.stdin.write(line + "\n");
    return reply;
  }

  async request(op: string, payload: Record<string, unknown> = {}): Promise<BridgeReply> {
    const id = this.nextId++;
    const line = JSON.stringify({ id, op, ...payload });
    const reply = JSON.parse(await this.sendRaw(line)) as BridgeReply;
    if (reply.error) {
      throw new Error(`engine ${op} failed: ${reply.error.code}: ${reply.error.message}`);
    }
    if (reply.id !== id) {
      throw new Error(`reply id ${reply.id} does not match request id ${id}`);
    }
    return reply;
  }

  hello(): Promise<BridgeReply> {
    return this.request("hello", { version: 1 });
  }

  configure(config: ConfigureRequest): Promise<BridgeReply> {
    return this.request("configure", { ...config });
  }

  apsChoose(t: number): Promise<BridgeReply> {
    return this.request("aps_choose", { t });
  }

  apsObserve(t: number, scores: number[], labels?: string[]): Promise<BridgeReply> {
    const payload: Record<string, unknown> = { t, scores };
    if (labels) payload.labels = labels;
    return this.request("aps_observe", payload);
  }

  pem(cF: VectorPayload, cR: VectorPayload, lambdaPool?: number): Promise<BridgeReply> {
    const payload: Record<string, unknown> = { c_f: cF, c_r: cR };
    if (lambdaPool !== undefined) payload.lambda_pool = lambdaPool;
    return this.request("pem", payload);
  }

  lsm(
    base: VectorPayload,
    attr: VectorPayload,
    nullEmbedding: VectorPayload,
    lambdaAttr?: number,
  ): Promise<BridgeReply> {
    const payload: Record<string, unknown> = {
      l_base: base,
      l_attr: attr,
      l_null: nullEmbedding,
    };
    if (lambdaAttr !== undefined) payload.lambda_attr = lambdaAttr;
    return this.request("lsm", payload);
  }

  project(a: VectorPayload, b: VectorPayload): Promise<BridgeReply> {
    return this.request("project", { a, b });
  }

  async bye(): Promise<void> {
    await this.request("bye");
    await this.close();
  }

  async close(): Promise<void> {
    const proc = this.proc;
    if (!proc) return;
    this.proc = null;
    proc.stdin.end();
    await new Promise<void>((resolve) => {
      const timer = setTimeout(() => {
        proc.kill();
        resolve();
      }, 3000);
      proc.on("exit", () => {
        clearTimeout(timer);
        resolve();
      });
    });
  }
}
