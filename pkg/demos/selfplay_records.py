"""Generate one short self-play game on ring7 and print its last record
the way a fine-tuning job would see it."""

import io
import json

from dipaf import SearchConfig, selfplay_generate

buf = io.StringIO()
summary = selfplay_generate("ring7", 1, SearchConfig(iterations=32, n_candidates=8, horizon=0), buf,
                            max_year=1902, seed=1)
print(summary)
first = json.loads(buf.getvalue().splitlines()[-1])
for key in ("user", "assistant", "value", "weight", "meta"):
    print(f"--- {key}\n{first[key]}")
