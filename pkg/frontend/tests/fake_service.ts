// In-memory stand-in for the triage service, wired in as global fetch.
// Mirrors the server's queue and verdict semantics (409 on double review,
// 422 on incomplete verdicts) closely enough for controller tests.

export const CRITERIA = [
  'discrimination',
  'animal_cruelty',
  'dangerous_or_selfharm',
  'obscenity',
  'shocking',
];

interface Item {
  id: string;
  state: 'triage_pending' | 'published' | 'triage_rejected';
}

export class FakeService {
  items: Item[];
  verdicts: Array<{ id: string; decision: string; criterion: string | null; reviewer: string }> =
    [];
  failNextGet = false;

  constructor(ids: string[]) {
    this.items = ids.map((id) => ({ id, state: 'triage_pending' }));
  }

  private pending(): Item[] {
    return this.items.filter((i) => i.state === 'triage_pending');
  }

  private reviewed(): number {
    return this.items.length - this.pending().length;
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    if (this.failNextGet && (!init || init.method === undefined)) {
      this.failNextGet = false;
      return new Response('boom', { status: 500 });
    }
    if (url.endsWith('/api/triage/criteria')) {
      return Response.json({ criteria: CRITERIA });
    }
    if (url.endsWith('/api/triage/next')) {
      const head = this.pending()[0];
      return Response.json({
        pending: this.pending().length,
        reviewed: this.reviewed(),
        next: head
          ? {
              video_id: head.id,
              media: { frames_dir: null, audio: null, url: `/media/${head.id}` },
              duration_s: 4,
              transcript_preview: null,
              filter_detail: null,
            }
          : null,
      });
    }
    if (url.endsWith('/api/stats')) {
      return Response.json({
        by_state: {},
        pending: this.pending().length,
        reviewed: this.reviewed(),
      });
    }
    const verdictMatch = url.match(/\/api\/triage\/([^/]+)\/verdict$/);
    if (verdictMatch && init?.method === 'POST') {
      const id = decodeURIComponent(verdictMatch[1]!);
      const body = JSON.parse(String(init.body));
      if (
        (body.decision === 'remove' && !body.criterion) ||
        (body.decision === 'keep' && body.criterion) ||
        (body.criterion && !CRITERIA.includes(body.criterion))
      ) {
        return Response.json({ detail: 'bad verdict' }, { status: 422 });
      }
      const item = this.items.find((i) => i.id === id);
      if (!item) return Response.json({ detail: 'unknown' }, { status: 404 });
      if (item.state !== 'triage_pending') {
        return Response.json({ detail: 'already reviewed' }, { status: 409 });
      }
      item.state = body.decision === 'keep' ? 'published' : 'triage_rejected';
      this.verdicts.push({
        id,
        decision: body.decision,
        criterion: body.criterion ?? null,
        reviewer: body.reviewer,
      });
      return Response.json({ video_id: id, state: item.state, criterion: body.criterion ?? null });
    }
    return Response.json({ detail: 'not found' }, { status: 404 });
  };
}
