// Typed client for the triage service REST API. Every endpoint the UI
// touches goes through this module so the rest of the code never sees a
// raw Response object.

export interface UtterancePreview {
  start_s: number;
  end_s: number;
  text: string;
  speaker?: string | null;
}

export interface QueueItem {
  video_id: string;
  media: { frames_dir: string | null; audio: string | null; url: string };
  duration_s: number;
  transcript_preview: UtterancePreview[] | null;
  filter_detail: string | null;
}

export interface QueueView {
  pending: number;
  reviewed: number;
  next: QueueItem | null;
}

export interface Verdict {
  decision: 'keep' | 'remove';
  criterion: string | null;
  reviewer: string;
  watched_fully?: boolean;
}

export type VerdictOutcome =
  | { status: 'ok'; state: string }
  | { status: 'conflict' }
  | { status: 'invalid'; detail: string };

export interface StatsView {
  by_state: Record<string, number>;
  pending: number;
  reviewed: number;
}

export class ServiceUnavailableError extends Error {
  constructor(detail: string) {
    super(`triage service unavailable: ${detail}`);
  }
}

async function getJson<T>(url: string): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url);
  } catch (err) {
    throw new ServiceUnavailableError(String(err));
  }
  if (!response.ok) {
    throw new ServiceUnavailableError(`GET ${url} -> ${response.status}`);
  }
  return (await response.json()) as T;
}

export class TriageApi {
  constructor(private readonly baseUrl: string = '') {}

  async criteria(): Promise<string[]> {
    const body = await getJson<{ criteria: string[] }>(
      `${this.baseUrl}/api/triage/criteria`,
    );
    return body.criteria;
  }

  async next(): Promise<QueueView> {
    return getJson<QueueView>(`${this.baseUrl}/api/triage/next`);
  }

  async stats(): Promise<StatsView> {
    return getJson<StatsView>(`${this.baseUrl}/api/stats`);
  }

  async submitVerdict(videoId: string, verdict: Verdict): Promise<VerdictOutcome> {
    let response: Response;
    try {
      response = await fetch(
        `${this.baseUrl}/api/triage/${encodeURIComponent(videoId)}/verdict`,
        {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify(verdict),
        },
      );
    } catch (err) {
      throw new ServiceUnavailableError(String(err));
    }
    if (response.ok) {
      const body = (await response.json()) as { state: string };
      return { status: 'ok', state: body.state };
    }
    if (response.status === 409) {
      return { status: 'conflict' };
    }
    if (response.status === 422) {
      const body = (await response.json().catch(() => ({ detail: 'invalid verdict' }))) as {
        detail?: unknown;
      };
      return { status: 'invalid', detail: String(body.detail ?? 'invalid verdict') };
    }
    throw new ServiceUnavailableError(
      `POST verdict -> ${response.status}`,
    );
  }
}
