import math

import pytest

from conftest import scripted_client
from vidhumor.backends import (
    BackendClient,
    CompletionRequest,
    FlakyTransport,
    MomentCandidate,
    ProtocolError,
    RetryPolicy,
    ScriptedTransport,
    TransportError,
    create_mock_app,
    detect_prompt_request,
    explain_prompt_request,
    fallback_localize,
    pseudo_embedding,
)
from vidhumor.segmenter import Segment


class TestAsr:
    def test_silent_fixture(self):
        client = scripted_client(
            {"asr": {"silent": {"language": "und", "utterances": []}}}
        )
        transcript = client.asr("media/silent.wav")
        assert transcript.utterances == ()
        assert transcript.language == "und"

    def test_scripted_transcript(self):
        fixture = {"asr": {"v1": {
            "language": "en",
            "utterances": [
                {"start_s": 0.0, "end_s": 1.0, "text": "hello"},
                {"start_s": 1.0, "end_s": 2.0, "text": "world"},
            ],
        }}}
        transcript = scripted_client(fixture).asr("media/v1.wav")
        assert [u.text for u in transcript.utterances] == ["hello", "world"]

    def test_french_language_tag(self):
        client = scripted_client({"asr": {"fr1": {
            "language": "fr",
            "utterances": [{"start_s": 0, "end_s": 1, "text": "bonjour"}],
        }}})
        assert client.asr("fr1").language != "en"


class TestCaption:
    def test_k_times_frames(self):
        fixture = {"caption": {"*": [f"c{i}" for i in range(20)]}}
        out = scripted_client(fixture).caption_frames(
            [f"f{i}" for i in range(10)], "Who is doing what?", k=20
        )
        assert sum(len(c) for c in out) == 200

    def test_single_scripted_caption(self):
        fixture = {"caption": {"f1": ["a man waves"]}}
        out = scripted_client(fixture).caption_frames(["f1"], "p", k=1)
        assert out == [["a man waves"]]

    def test_padding_by_repetition(self):
        fixture = {"caption": {"f1": ["a", "b"]}}
        out = scripted_client(fixture).caption_frames(["f1"], "p", k=3)
        assert out == [["a", "b", "a"]]


class TestRetrieve:
    def test_single_candidate(self):
        client = scripted_client({"retrieve": {"*": {"only": 0.4}}})
        assert client.retrieve_best("seg", ["only"]) == (0, 0.4)

    def test_tie_break_lowest_index(self):
        client = scripted_client(
            {"retrieve": {"*": {"a": 0.2, "b": 0.9, "c": 0.9}}}
        )
        index, score = client.retrieve_best("seg", ["a", "b", "c"])
        assert (index, score) == (1, 0.9)

    def test_argmax_invariant_under_permutation(self):
        client = scripted_client(
            {"retrieve": {"*": {"a": 0.1, "b": 0.9, "c": 0.5}}}
        )
        for order in (["a", "b", "c"], ["c", "a", "b"], ["b", "c", "a"]):
            index, _ = client.retrieve_best("seg", order)
            assert order[index] == "b"

    def test_empty_candidates(self):
        with pytest.raises(ValueError):
            scripted_client({}).retrieve_best("seg", [])


class TestAudiotag:
    def test_scripted_tags(self):
        fixture = {"audiotag": {"v1": [["music", 0.8], ["laughter", 0.5],
                                       ["speech", 0.25]]}}
        out = scripted_client(fixture).audiotag("v1")
        assert out == [("music", 0.8), ("laughter", 0.5), ("speech", 0.25)]

    def test_empty(self):
        assert scripted_client({"audiotag": {"v1": []}}).audiotag("v1") == []

    def test_resorts_descending(self):
        fixture = {"audiotag": {"v1": [["speech", 0.2], ["music", 0.9]]}}
        out = scripted_client(fixture).audiotag("v1")
        assert out == [("music", 0.9), ("speech", 0.2)]


class TestEmbed:
    def test_identical_strings_cosine_one(self):
        client = scripted_client({})
        u, v = client.embed(["same text", "same text"])
        assert sum(a * b for a, b in zip(u, v)) == pytest.approx(1.0)

    def test_orthogonal_scripted(self):
        client = scripted_client({"embed": {"x": [1, 0], "y": [0, 1]}})
        u, v = client.embed(["x", "y"])
        assert sum(a * b for a, b in zip(u, v)) == pytest.approx(0.0)

    def test_normalization(self):
        client = scripted_client({"embed": {"x": [1, 0], "y": [1, 1]}})
        u, v = client.embed(["x", "y"])
        assert math.hypot(*v) == pytest.approx(1.0, abs=1e-6)
        assert sum(a * b for a, b in zip(u, v)) == pytest.approx(
            1 / math.sqrt(2)
        )

    def test_dimension_mismatch(self):
        client = scripted_client({"embed": {"x": [1, 0], "y": [1, 1, 1]}})
        with pytest.raises(ProtocolError, match="dimension"):
            client.embed(["x", "y"])

    def test_pseudo_embedding_deterministic(self):
        assert pseudo_embedding("abc") == pseudo_embedding("abc")
        assert pseudo_embedding("abc") != pseudo_embedding("abd")


class TestComplete:
    def test_exact_prompt_key(self):
        client = scripted_client({"complete": {"the prompt": "the reply"}})
        req = CompletionRequest(prompt="the prompt", temperature=0.0)
        assert client.complete(req) == "the reply"

    def test_rule_matching(self):
        client = scripted_client({"complete_rules": [
            {"contains": ["Transcript", "caption"], "reply": "r1"},
            {"contains": ["Transcript"], "reply": "r2"},
        ]})
        assert client.complete(CompletionRequest("Transcript + caption")) \
            == "r1"
        assert client.complete(CompletionRequest("Transcript only")) == "r2"

    def test_unknown_prompt_errors(self):
        with pytest.raises(ProtocolError):
            scripted_client({}).complete(CompletionRequest("???"))

    def test_temperature_defaults(self):
        assert detect_prompt_request("p").temperature == 0.0
        assert explain_prompt_request("p").temperature == 0.3

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(prompt="p", temperature=-0.1)


class TestLocalize:
    def test_scripted_candidates(self):
        fixture = {"localize": {"q": [[0.0, 2.0, 0.9], [5.0, 9.0, 0.4]]}}
        out = scripted_client(fixture).localize("vid", "q")
        assert [(c.start_s, c.end_s) for c in out] == [(0.0, 2.0), (5.0, 9.0)]

    def test_truncates_and_sorts(self):
        cands = [[i, i + 1, i / 10] for i in range(8)]
        fixture = {"localize": {"q": cands}}
        out = scripted_client(fixture).localize("vid", "q", top_k=5)
        assert len(out) == 5
        assert [c.score for c in out] == sorted(
            (c.score for c in out), reverse=True
        )

    def test_inverted_candidate_rejected(self):
        with pytest.raises(ValueError):
            MomentCandidate(2.0, 1.0, 0.5)

    def test_fallback_localizer_ranks_matching_segment_first(self):
        # Query shares its embedding with the second segment's caption.
        fixture = {"embed": {"q": [0, 1, 0], "cap a": [1, 0, 0],
                             "cap b": [0, 1, 0], "cap c": [0, 0, 1]}}
        client = scripted_client(fixture)
        segments = [Segment(0, 0.0, 3.0, "shot_boundary"),
                    Segment(1, 3.0, 6.0, "shot_boundary"),
                    Segment(2, 6.0, 9.0, "shot_boundary")]
        out = fallback_localize("q", segments, ["cap a", "cap b", "cap c"],
                                client)
        assert (out[0].start_s, out[0].end_s) == (3.0, 6.0)


class TestRetry:
    def test_recovers_within_budget(self):
        inner = ScriptedTransport({"audiotag": {"v1": []}})
        flaky = FlakyTransport(inner, failures=2)
        client = BackendClient(flaky, retry=RetryPolicy(max_attempts=3,
                                                        backoff_s=0.0))
        assert client.audiotag("v1") == []
        assert flaky.calls == 3

    def test_exhausts_after_max_attempts(self):
        flaky = FlakyTransport(ScriptedTransport({}), failures=99)
        client = BackendClient(flaky, retry=RetryPolicy(max_attempts=3,
                                                        backoff_s=0.0))
        with pytest.raises(TransportError):
            client.audiotag("v1")
        assert flaky.calls == 3


class TestMockServer:
    @pytest.fixture
    def http_client(self):
        from fastapi.testclient import TestClient

        fixture = {
            "asr": {"v1": {"language": "en", "utterances": [
                {"start_s": 0, "end_s": 1, "text": "hi"}]}},
        }
        return TestClient(create_mock_app(fixture))

    def test_replays_fixture(self, http_client):
        resp = http_client.post("/asr", json={"audio": "media/v1.wav"})
        body = resp.json()
        assert body["ok"] is True
        assert body["data"]["language"] == "en"

    def test_unknown_key_error_envelope(self, http_client):
        body = http_client.post("/asr", json={"audio": "nope"}).json()
        assert body["ok"] is False
        assert "nope" in body["error"]

    def test_byte_identical_across_calls(self, http_client):
        payload = {"audio": "v1"}
        first = http_client.post("/asr", json=payload).content
        second = http_client.post("/asr", json=payload).content
        assert first == second
