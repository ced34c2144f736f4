"""The zero-shot chat-model baseline, exercised offline with an injected
transport. Shows prompt rendering, response parsing, disk caching and the
predict-0 fallback for unparseable answers.

Run from the repository root: python demos/05_llm_baseline_offline.py
"""

import tempfile

from sspc.corpus import Dataset, Problem
from sspc.llm import LlmConfig, default_template, render_prompt, run_llm_baseline

items = [
    (Problem("problem-1", ("He went home.", "Dinner was ready.", "LOL ok")), (0, 1)),
    (Problem("problem-2", ("One sentence.", "Another one.")), (0,)),
]
dataset = Dataset("demo", items)

print("--- rendered prompt for problem-1 ---")
print(render_prompt(default_template(), items[0][0]))

def scripted_transport(url, headers, payload, timeout):
    # stands in for a chat-completions endpoint; first problem answered
    # correctly, second with prose the parser cannot use
    text = payload["messages"][0]["content"]
    answer = "[0, 1]" if "LOL ok" in text else "hmm, hard to tell!"
    return {"choices": [{"message": {"content": answer}}]}

with tempfile.TemporaryDirectory() as tmp:
    cfg = LlmConfig(
        endpoint="https://example.invalid/v1/chat/completions",
        model="demo-model",
        cache_dir=tmp,
        max_retries=0,
        requests_per_minute=10_000,
    )
    report, stats = run_llm_baseline(cfg, dataset, transport=scripted_transport)
    print(f"macro-F1 {report.macro_f1:.3f}  requests {stats.n_requests}  "
          f"parse failures {stats.parse_failures}  fallbacks {stats.fallback_ids}")

    # second run hits the disk cache: same report, zero requests
    report2, stats2 = run_llm_baseline(cfg, dataset, transport=scripted_transport)
    print(f"warm cache: requests {stats2.n_requests}, cache hits {stats2.cache_hits}, "
          f"same report {report2.to_dict() == report.to_dict()}")
