/**
 * Typed client for the service's documented HTTP routes. The finalize
 * upload builds its multipart body by hand so the client works the same
 * under browsers, jsdom and node test runners.
 */

import { ActionEvent, BundleResponse, eventToWire } from "./wire.js";

export interface AuthResult {
  token: string;
  user_id: string;
  role: string;
}

export interface TutorialDoc {
  tutorial_id: string;
  title: string;
  language: string;
  owner_id: string;
  section_ids: string[];
  status: "draft" | "released";
  version: number;
  released_at: number | null;
}

export interface SearchHit {
  section_id: string;
  artifact_kind: "notes" | "code" | "transcript" | "quiz";
  at: number;
  snippet: string;
  span: [number, number];
}

export interface ExecutionDoc {
  stdout: string;
  stderr: string;
  exit_status: number;
  wall_time_ms: number;
  timed_out: boolean;
  compile_errors: string | null;
  stdout_truncated: boolean;
  stderr_truncated: boolean;
  isolation: string;
}

export interface HelpDoc {
  normalized_error: string;
  language_id: string;
  resources: { title: string; url: string; score: number }[];
  provider_warning: string | null;
}

export interface GradeDoc {
  score: number;
  per_question: { correct: boolean; explanation: string; points_awarded: number }[];
}

export interface FinalizeDoc {
  section_id: string;
  tutorial_id: string;
  duration_ms: number;
  final_code: string;
  event_count: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: Record<string, unknown>,
  ) {
    super(`HTTP ${status}: ${body["detail"] ?? body["error"] ?? "request failed"}`);
  }
}

export class ApiClient {
  token: string | null = null;

  constructor(
    readonly baseUrl: string,
    // wrapped so the default keeps its window binding in real browsers
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const headers: Record<string, string> = { ...extra };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: this.headers() };
    if (body !== undefined) {
      (init.headers as Record<string, string>)["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => ({})));
    }
    return (await response.json()) as T;
  }

  async register(email: string, password: string, role: "author" | "student"): Promise<AuthResult> {
    const result = await this.request<AuthResult>("POST", "/auth/register", { email, password, role });
    this.token = result.token;
    return result;
  }

  async login(email: string, password: string): Promise<AuthResult> {
    const result = await this.request<AuthResult>("POST", "/auth/login", { email, password });
    this.token = result.token;
    return result;
  }

  async loginExternal(externalToken: string, role: "author" | "student" = "student"): Promise<AuthResult> {
    const result = await this.request<AuthResult>("POST", "/auth/login", {
      external_token: externalToken,
      role,
    });
    this.token = result.token;
    return result;
  }

  createTutorial(title: string, language: string): Promise<TutorialDoc> {
    return this.request("POST", "/tutorials", { title, language });
  }

  async listTutorials(): Promise<TutorialDoc[]> {
    const doc = await this.request<{ tutorials: TutorialDoc[] }>("GET", "/tutorials");
    return doc.tutorials;
  }

  releaseTutorial(tutorialId: string): Promise<TutorialDoc> {
    return this.request("POST", `/tutorials/${tutorialId}/release`);
  }

  resequence(tutorialId: string, sectionIds: string[]): Promise<TutorialDoc> {
    return this.request("PUT", `/tutorials/${tutorialId}/order`, { section_ids: sectionIds });
  }

  deleteSection(tutorialId: string, sectionId: string): Promise<TutorialDoc> {
    return this.request("DELETE", `/tutorials/${tutorialId}/sections/${sectionId}`);
  }

  async beginSession(tutorialId: string, slot: number, language: string, notes: string): Promise<string> {
    const doc = await this.request<{ session_id: string }>("POST", "/sessions", {
      tutorial_id: tutorialId,
      section_slot: slot,
      language,
      notes_source: notes,
    });
    return doc.session_id;
  }

  async appendEvents(sessionId: string, batch: ActionEvent[]): Promise<number> {
    const doc = await this.request<{ accepted_through_seq: number }>("POST", `/sessions/${sessionId}/events`, {
      events: batch.map((e) => ({ seq: e.seq, event: eventToWire(e) })),
    });
    return doc.accepted_through_seq;
  }

  async finalizeSession(sessionId: string, audio: Uint8Array, durationMs: number): Promise<FinalizeDoc> {
    const boundary = `tutorcast${Date.now().toString(16)}${Math.floor(Math.random() * 1e9).toString(16)}`;
    const encoder = new TextEncoder();
    const head = encoder.encode(
      `--${boundary}\r\n` +
        `Content-Disposition: form-data; name="duration_ms"\r\n\r\n${durationMs}\r\n` +
        `--${boundary}\r\n` +
        `Content-Disposition: form-data; name="audio"; filename="audio.mp3"\r\n` +
        `Content-Type: audio/mpeg\r\n\r\n`,
    );
    const tail = encoder.encode(`\r\n--${boundary}--\r\n`);
    const body = new Uint8Array(head.length + audio.length + tail.length);
    body.set(head, 0);
    body.set(audio, head.length);
    body.set(tail, head.length + audio.length);

    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/finalize`, {
      method: "POST",
      headers: this.headers({ "Content-Type": `multipart/form-data; boundary=${boundary}` }),
      body,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => ({})));
    }
    return (await response.json()) as FinalizeDoc;
  }

  discardSession(sessionId: string): Promise<{ discarded: boolean }> {
    return this.request("DELETE", `/sessions/${sessionId}`);
  }

  fetchBundle(tutorialId: string, sectionId: string): Promise<BundleResponse> {
    return this.request("GET", `/tutorials/${tutorialId}/sections/${sectionId}/bundle`);
  }

  async fetchAudio(tutorialId: string, sectionId: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(`${this.baseUrl}/tutorials/${tutorialId}/sections/${sectionId}/audio`, {
      headers: this.headers(),
    });
    if (!response.ok) throw new ApiError(response.status, {});
    return new Uint8Array(await response.arrayBuffer());
  }

  serverStateAt(tutorialId: string, sectionId: string, t: number): Promise<Record<string, unknown>> {
    return this.request("GET", `/tutorials/${tutorialId}/sections/${sectionId}/state?t=${t}`);
  }

  async search(tutorialId: string, keywords: string): Promise<SearchHit[]> {
    const doc = await this.request<{ hits: SearchHit[] }>(
      "GET",
      `/tutorials/${tutorialId}/search?q=${encodeURIComponent(keywords)}`,
    );
    return doc.hits;
  }

  help(errorText: string, languageId: string): Promise<HelpDoc> {
    return this.request("POST", "/help", { error_text: errorText, language_id: languageId });
  }

  execute(languageId: string, source: string, stdin = ""): Promise<ExecutionDoc> {
    return this.request("POST", "/execute", { language_id: languageId, source, stdin });
  }

  gradeQuiz(sectionId: string, answers: number[]): Promise<GradeDoc> {
    return this.request("POST", `/quiz/${sectionId}/grade`, { answers });
  }

  async languages(): Promise<string[]> {
    const doc = await this.request<{ languages: string[] }>("GET", "/languages");
    return doc.languages;
  }
}
