// Typed client for the handfit annotation service. Every response is
// validated with zod at the boundary; the parsed SessionState is the only
// authoritative UI state.

import { z } from "zod";

const CameraSchema = z.object({
  fx: z.number(),
  fy: z.number(),
  cx: z.number(),
  cy: z.number(),
  image_width: z.number().int().positive(),
  image_height: z.number().int().positive(),
});

const ParamsSchema = z.object({
  shape: z.array(z.number()).length(10),
  articulation: z.array(z.number()).length(45),
  rotation: z.array(z.number()).length(3),
  translation: z.array(z.number()).length(3),
});

const LossSchema = z.object({
  total: z.number(),
  components: z.record(z.string(), z.number()),
});

const point2 = z.tuple([z.number(), z.number()]);
const point3 = z.tuple([z.number(), z.number(), z.number()]);

export const SessionStateSchema = z.object({
  id: z.string(),
  instance_index: z.number().int(),
  side: z.enum(["right", "left"]),
  image: z.string().nullable(),
  camera: CameraSchema,
  params: ParamsSchema,
  keypoints_3d: z.array(point3).length(21),
  projected: z.array(point2).length(21).nullable(),
  annotated: z.record(z.string(), point2),
  loss: LossSchema.nullable(),
  stage_losses: z.array(LossSchema),
  limits: z.object({
    min: z.array(z.number()).length(45),
    max: z.array(z.number()).length(45),
  }),
  history_depth: z.number().int(),
  status: z.enum(["unreviewed", "accepted", "rejected"]),
});

export type SessionState = z.infer<typeof SessionStateSchema>;
export type Camera = z.infer<typeof CameraSchema>;

const InstancePageSchema = z.object({
  instances: z.array(
    z.object({
      index: z.number().int(),
      image: z.string().nullable(),
      side: z.enum(["right", "left"]),
      status: z.string(),
      annotated_count: z.number().int(),
    }),
  ),
  next_cursor: z.number().int().nullable(),
  total: z.number().int(),
});

export type InstancePage = z.infer<typeof InstancePageSchema>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function request<T>(
  schema: z.ZodType<T>,
  baseUrl: string,
  path: string,
  init?: RequestInit,
): Promise<T> {
  const res = await fetch(`${baseUrl}${path}`, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(
      res.status,
      typeof body?.error === "string" ? body.error : "http_error",
      typeof body?.detail === "string" ? body.detail : res.statusText,
    );
  }
  return schema.parse(body);
}

export class AnnotationClient {
  constructor(readonly baseUrl: string = "") {}

  listInstances(cursor = 0): Promise<InstancePage> {
    return request(InstancePageSchema, this.baseUrl, `/instances?cursor=${cursor}`);
  }

  createSession(instanceIndex: number): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, "/sessions", {
      method: "POST",
      body: JSON.stringify({ instance_index: instanceIndex }),
    });
  }

  getState(sessionId: string): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, `/sessions/${sessionId}/state`);
  }

  putParams(
    sessionId: string,
    body: {
      rotation?: number[];
      translation?: number[];
      articulation?: Record<string, number>;
    },
  ): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, `/sessions/${sessionId}/params`, {
      method: "PUT",
      body: JSON.stringify(body),
    });
  }

  putKeypoint(sessionId: string, joint: number, u: number, v: number): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, `/sessions/${sessionId}/keypoints`, {
      method: "PUT",
      body: JSON.stringify({ joint, u, v }),
    });
  }

  deleteKeypoint(sessionId: string, joint: number): Promise<SessionState> {
    return request(
      SessionStateSchema,
      this.baseUrl,
      `/sessions/${sessionId}/keypoints/${joint}`,
      { method: "DELETE" },
    );
  }

  fit(sessionId: string, mode: "supervised" | "unsupervised"): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, `/sessions/${sessionId}/fit`, {
      method: "POST",
      body: JSON.stringify({ mode }),
    });
  }

  reset(sessionId: string): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, `/sessions/${sessionId}/reset`, {
      method: "POST",
      body: JSON.stringify({}),
    });
  }

  save(sessionId: string, status: "accepted" | "rejected"): Promise<SessionState> {
    return request(SessionStateSchema, this.baseUrl, `/sessions/${sessionId}/save`, {
      method: "POST",
      body: JSON.stringify({ status }),
    });
  }
}
