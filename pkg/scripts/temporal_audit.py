"""Re-extract features from stores truncated at share time for events of an existing run.

    python3 scripts/temporal_audit.py --config configs/small.yaml --out runs/small -n 2000
"""
import argparse

from linkshare._index import DAY
from linkshare.audit import temporal_audit
from linkshare.config import load
from linkshare.pipeline import Run
from linkshare.shares import filter_discovery_shares, read_shares_jsonl


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", required=True, help="run directory with ingest and embed done")
    ap.add_argument("-n", type=int, default=10_000)
    args = ap.parse_args()
    r = Run(load(args.config, seed=args.seed), args.out)
    r.check()
    ctx = r.context()
    a = r.cfg.analysis
    shares = read_shares_jsonl(r.path("store", "shares.jsonl"))
    shares = shares[(shares["share_ts"] >= a.start_ts) & (shares["share_ts"] < a.start_ts + a.days * DAY)]
    events = filter_discovery_shares(shares.reset_index(drop=True), ctx.playback)
    res = temporal_audit(events, ctx, n=args.n, seed=r.cfg.module_seed("audit"))
    print(f"{res.n_identical}/{res.n_audited} identical; {res.n_open_later_day} opened on a later day")
    for row, col, full, trunc in res.mismatches[:20]:
        print(f"  event {row}: {col} full={full!r} truncated={trunc!r}")
    raise SystemExit(0 if res.ok else 1)


if __name__ == "__main__":
    main()
