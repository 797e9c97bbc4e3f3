import json

import httpx
import numpy as np
import pytest

from claysculpt.errors import BackendTransportError
from claysculpt.llm import ChatClient, LLMConfig, ask_json, extract_json, fill, load_prompt
from claysculpt.planner import llm_backend, plan
from claysculpt.pointcloud import cluster
from claysculpt.subgoal import LLMBackend, parse_modification


def chat(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def scripted(replies, log=None):
    replies = iter(replies)

    def handler(request):
        if log is not None:
            log.append(json.loads(request.content))
        return chat(next(replies))

    return httpx.MockTransport(handler)


def test_extract_json_accepts_fenced_blocks():
    assert extract_json('```json\n{"a": 1}\n```') == {"a": 1}
    assert extract_json(' {"a": [1, 2]} ') == {"a": [1, 2]}
    with pytest.raises(ValueError):
        extract_json("no json here")


def test_prompts_are_packaged_and_fillable():
    text = fill(load_prompt("subgoal_v1.txt"), PROMPT="line", POINTS="cluster 0: point at (0, 0, 0)")
    assert "line" in text and "{PROMPT}" not in text


def test_request_carries_model_and_temperature(monkeypatch):
    monkeypatch.setenv("TEST_KEY", "secret")
    seen = []

    def handler(request):
        seen.append(request)
        return chat("{}")

    client = ChatClient(LLMConfig(model="m1", temperature=0.0, api_key_env="TEST_KEY"), httpx.MockTransport(handler))
    client.complete([{"role": "user", "content": "hi"}])
    body = json.loads(seen[0].content)
    assert body["model"] == "m1" and body["temperature"] == 0.0
    assert seen[0].headers["Authorization"] == "Bearer secret"


def test_ask_json_counts_retries_and_sends_correction():
    log = []
    client = ChatClient(LLMConfig(), scripted(["nope", '{"ok": true}'], log))
    reply = ask_json(client, [{"role": "user", "content": "q"}], lambda o: o["ok"], retries=3)
    assert reply.ok and reply.value is True and reply.retries == 1
    assert len(log) == 2
    assert log[1]["messages"][-1]["role"] == "user" and "not valid" in log[1]["messages"][-1]["content"]


def test_ask_json_gives_up_after_retries():
    client = ChatClient(LLMConfig(), scripted(["x"] * 3))
    reply = ask_json(client, [], lambda o: o, retries=2)
    assert not reply.ok and reply.value is None and len(reply.raw) == 3 and len(reply.errors) == 3


def test_transport_errors_are_not_retried():
    calls = []

    def boom(request):
        calls.append(request)
        raise httpx.ConnectError("refused")

    client = ChatClient(LLMConfig(), httpx.MockTransport(boom))
    with pytest.raises(BackendTransportError):
        ask_json(client, [], lambda o: o, retries=3)
    assert len(calls) == 1


def test_http_error_status_is_a_transport_error():
    client = ChatClient(LLMConfig(), httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(BackendTransportError):
        client.complete([])


def test_subgoal_backend_parses_valid_reply(rng):
    cloud = cluster(rng.uniform(0, 0.04, size=(200, 3)), k=3)
    reply = '{"kind": "thin", "cluster": 1, "direction": [1, 0, 0], "weight": 0.3}'
    backend = LLMBackend(LLMConfig(), transport=scripted([reply]))
    mod, info = backend.propose(cloud, "line")
    assert mod == parse_modification(json.loads(reply), 3)
    assert info["retries"] == 0 and info["parsed"]


def test_subgoal_backend_degrades_to_none(rng):
    cloud = cluster(rng.uniform(0, 0.04, size=(200, 3)), k=3)
    backend = LLMBackend(LLMConfig(retries=1), transport=scripted(['{"kind": "bend"}', "[]"]))
    mod, info = backend.propose(cloud, "line")
    assert mod is None and not info["parsed"] and len(info["errors"]) == 2


def test_llm_planner_builds_a_line():
    replies = [
        '{"confident": true}',
        '{"done": false}', '{"add": [[0, 2, 0], [1, 2, 0], [2, 2, 0]]}',
        '{"done": false}', '{"remove": []}',
        '{"done": false}', '{"add": [[3, 2, 0], [4, 2, 0]]}',
        '{"done": true}',
    ]
    result = plan("line", llm_backend(LLMConfig(), transport=scripted(replies)))
    assert sorted(result.cells) == [(i, 2, 0) for i in range(5)]


def test_llm_planner_treats_bad_cells_as_rejected_proposals():
    replies = ['{"confident": true}', '{"done": false}', '{"add": [[0, 0, 7]]}', '{"done": true}']
    result = plan("line", llm_backend(LLMConfig(), transport=scripted(replies)))
    assert len(result) == 0
    sigma = [r for r in result.audit if r["proposer"] == "sigma"][0]
    assert sigma["accepted"] is False
