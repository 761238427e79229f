"""The fixture-driven chat-completions mock used by the offline e2e tests."""

import json

import pytest
import requests

from kpagg.mock_server import MockFixtures, running_server

from .conftest import MOCK_FIXTURES

FIXTURES = {
    "responses": [
        {
            "match": "Alpha Title",
            "samples": [
                {"text": '"one", "two"]', "logprobs": [-0.1, -0.2]},
                {"text": '"three"]'},
            ],
        }
    ],
    "default": {"samples": [{"text": '"fallback"]'}]},
}


@pytest.fixture(scope="module")
def url():
    with running_server(MockFixtures(FIXTURES)) as endpoint:
        yield endpoint + "/chat/completions"


def post(url, messages, **payload):
    payload.setdefault("model", "mock")
    payload["messages"] = messages
    return requests.post(url, json=payload, timeout=10)


def user_turn(text):
    return [{"role": "user", "content": text}]


class TestLookup:
    def test_substring_match(self):
        fx = MockFixtures(FIXTURES)
        assert fx.lookup("... Alpha Title ...")["match"] == "Alpha Title"

    def test_falls_back_to_default(self):
        fx = MockFixtures(FIXTURES)
        assert fx.lookup("unmatched")["samples"][0]["text"] == '"fallback"]'

    def test_no_default_returns_none(self):
        fx = MockFixtures({"responses": []})
        assert fx.lookup("anything") is None

    def test_invalid_shape_rejected(self):
        with pytest.raises(ValueError):
            MockFixtures({"no_responses": []})


class TestServer:
    def test_prefill_request_gets_continuation(self, url):
        messages = user_turn("Alpha Title") + [{"role": "assistant", "content": "["}]
        body = post(url, messages).json()
        assert body["choices"][0]["message"]["content"] == '"one", "two"]'

    def test_no_prefill_gets_full_list(self, url):
        body = post(url, user_turn("Alpha Title")).json()
        assert body["choices"][0]["message"]["content"] == '["one", "two"]'

    def test_samples_cycle(self, url):
        body = post(url, user_turn("Alpha Title"), n=5).json()
        texts = [c["message"]["content"] for c in body["choices"]]
        assert texts == [
            '["one", "two"]',
            '["three"]',
            '["one", "two"]',
            '["three"]',
            '["one", "two"]',
        ]

    def test_logprobs_only_when_requested(self, url):
        with_lp = post(url, user_turn("Alpha Title"), logprobs=True).json()
        content = with_lp["choices"][0]["logprobs"]["content"]
        assert [t["logprob"] for t in content] == [-0.1, -0.2]
        without = post(url, user_turn("Alpha Title")).json()
        assert without["choices"][0]["logprobs"] is None

    def test_unknown_path_404(self, url):
        bad = url.replace("/chat/completions", "/embeddings")
        assert post(bad, user_turn("x")).status_code == 404

    def test_malformed_body_400(self, url):
        r = requests.post(url, data=b"{not json", timeout=10)
        assert r.status_code == 400

    def test_unmatched_without_default_400(self):
        with running_server(MockFixtures({"responses": []})) as endpoint:
            r = post(endpoint + "/chat/completions", user_turn("x"))
            assert r.status_code == 400


def test_bundled_fixtures_cover_toy_corpus(toy_docs):
    fx = MockFixtures.load(MOCK_FIXTURES)
    for doc in toy_docs:
        entry = fx.lookup(f"Title: {doc.title}\nAbstract: {doc.body}")
        assert entry is not None, doc.id
        assert entry.get("samples"), doc.id


def test_fixture_file_is_valid_json():
    data = json.loads(MOCK_FIXTURES.read_text(encoding="utf-8"))
    assert "responses" in data
