"""Fixture record set matching the published 7B shard aggregates at B=512.

Counts back-derived from the published one-decimal percentages over N=54:
fixed 49 correct / avg 466 tokens; adaptive 43 correct, 8 early-and-wrong,
avg 286; bitcal 45 correct, 6 early-and-wrong, avg 316.
"""

from bithalt.engine import EpisodeRecord

SHARD_N = 54
GROUPS = {
    # method: (n_correct, n_early_wrong, avg_tokens)
    "fixed": (49, 0, 466),
    "adaptive": (43, 8, 286),
    "bitcal": (45, 6, 316),
}
BUDGET = 512


def build_7b_records(method):
    n_correct, n_early_wrong, avg_tokens = GROUPS[method]
    records = []
    for i in range(SHARD_N):
        correct = i < n_correct
        if method == "fixed":
            early = False
            stop_cause = "eos"
        elif correct:
            early = True
            stop_cause = "tail_stop"
        elif i - n_correct < n_early_wrong:
            early = True
            stop_cause = "confident_stop"
        else:
            early = False
            stop_cause = "budget_exhausted"
        records.append(EpisodeRecord(
            example_id=f"gsm-{i:04d}",
            method=method,
            budget=BUDGET,
            tokens_used=avg_tokens,
            steps=avg_tokens // 16,
            actions=(),
            stop_cause=stop_cause,
            first_marker_tokens=None,
            generated_text="... #### 42" if correct else "... #### 1",
            predicted_answer=42.0 if correct else 1.0,
            gold_answer=42.0,
            correct=correct,
            early_halt=early,
            model="7b",
        ))
    return records
