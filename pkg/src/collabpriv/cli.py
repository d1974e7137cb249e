"""Command-line driver.

    collabpriv ingest     --data u.data --items u.item [--out DIR]
    collabpriv sweep-cta  --data u.data --items u.item --out cta.csv
    collabpriv sweep-evs  --data u.data --items u.item --out evs.csv
    collabpriv simulate   --config session.cfg --seed 7 --out transcript.txt
    collabpriv recommend  --data u.data --items u.item --users 1,2,3 --out referrals.csv
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import sys
from pathlib import Path

from . import __version__
from .core_model import DataError, Dataset, RatingProfile, load_csv, load_movielens
from .cta import ConcealmentParams
from .evs import HilbertParams, build_group_profile, conceal_global
from .pipeline import SweepGrid, conceal_all, sweep_cta, sweep_evs
from .policy import PolicyError, ServicePolicy, load_rules, load_taxonomy
from .protocol_sim import Peer, SessionConfig, run_session, synthetic_features
from .recommender import recommend
from .serialize import write_referrals

EXIT_OK, EXIT_USAGE, EXIT_ABORTED = 0, 1, 2


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _load(args) -> Dataset:
    if args.data is None or args.items is None:
        raise DataError("--data and --items are required")
    if args.format == "csv":
        return load_csv(args.data, args.items)
    return load_movielens(args.data, args.items)


def _write_csv(rows, columns, out, seeds) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["%.10g" % row[c] if isinstance(row[c], float) else row[c] for c in columns])
        fh.write(f"# seed={' '.join(str(s) for s in seeds)}, version={__version__}\n")
    finally:
        if out:
            fh.close()


def _grid(args) -> SweepGrid:
    kw = dict(seeds=_ints(args.seeds), noise_sigma0=args.sigma0, test_fraction=args.test_fraction,
              n_users=args.users, n_items=args.n_items, K=args.k)
    if getattr(args, "d_dim", None):
        kw["d_dims"] = _ints(args.d_dim)
    if getattr(args, "orders", None):
        kw["orders"] = _ints(args.orders)
    if getattr(args, "steps", None):
        kw["steps"] = _ints(args.steps)
    if getattr(args, "evs_d_dim", None):
        kw["evs_d_dim"] = args.evs_d_dim
    return SweepGrid(**kw)


def cmd_ingest(args) -> int:
    ds = _load(args)
    print(f"ratings={len(ds)} users={len(ds.users())} items={len(ds.features)} rated_items={len(ds.items())} m={ds.m}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ratings.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "item", "rating"])
            for r in ds.ratings:
                w.writerow([r.user, r.item, r.value])
        names = ds.features.names or [f"f{j + 1}" for j in range(ds.features.length)]
        with open(out / "features.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item", *names])
            for item, vec in ds.features.items():
                w.writerow([item, *("%.17g" % v for v in vec)])
    return EXIT_OK


def cmd_sweep_cta(args) -> int:
    grid = _grid(args)
    rows = sweep_cta(_load(args), grid)
    _write_csv(rows, ["d_dim", "seed", "mae_plain", "mae_concealed", "vi"], args.out, grid.seeds)
    return EXIT_OK


def cmd_sweep_evs(args) -> int:
    grid = _grid(args)
    rows = sweep_evs(_load(args), grid)
    _write_csv(rows, ["order", "step", "seed", "mae", "vi"], args.out, grid.seeds)
    return EXIT_OK


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def parse_config(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        cfg[k.lower().replace("-", "_")] = v
    return cfg


def config_from_file(path, seed: int | None = None) -> SessionConfig:
    """Build a :class:`SessionConfig` from ``key=value`` lines (paths relative to the file)."""
    path = Path(path)
    cfg = parse_config(path)
    base = path.parent

    def rel(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    n_peers = int(cfg.get("peers", 6))
    if "data" in cfg:
        ds = load_movielens(rel(cfg["data"]), rel(cfg["items"])) if cfg.get("format", "movielens") == "movielens" \
            else load_csv(rel(cfg["data"]), rel(cfg["items"]))
        profiles = ds.profiles()
        users = sorted(profiles, key=lambda u: (-len(profiles[u]), str(u)))[:n_peers]
        features = ds.features
        peer_profiles = [(f"u{u}", RatingProfile(f"u{u}", profiles[u].ratings)) for u in users]
    else:
        from .protocol_sim import random_config
        synth = random_config(int(cfg.get("synthetic_seed", 0)), n_peers=n_peers, n_items=int(cfg.get("n_items", 40)))
        features = synthetic_features(int(cfg.get("n_items", 40)), int(cfg.get("synthetic_seed", 0)))
        peer_profiles = [(p.pseudonym, p.profile) for p in synth.peers]
    if len(peer_profiles) < n_peers:
        raise ValueError(f"only {len(peer_profiles)} peers available, config asks for {n_peers}")
    rules = load_rules(rel(cfg["rules"])) if "rules" in cfg else []
    taxonomy = load_taxonomy(rel(cfg["taxonomy"])) if "taxonomy" in cfg else {}
    absent = {t.strip() for t in cfg.get("absent", "").split(",") if t.strip()}
    peers = [Peer(name, prof, list(rules), joins=name not in absent) for name, prof in peer_profiles]
    target = cfg.get("target", peers[0].pseudonym)
    if "date" in cfg:
        now = dt.date.fromisoformat(cfg["date"])
    else:
        now = SessionConfig.__dataclass_fields__["now"].default
    return SessionConfig(
        peers=peers,
        target=target,
        features=features,
        group_size=int(cfg.get("group_size", 3)),
        concealment=ConcealmentParams(int(cfg.get("d_dim", 50)), float(cfg.get("sigma0", 0.1)),
                                      cfg.get("k", "auto") if cfg.get("k", "auto") == "auto" else int(cfg["k"])),
        hilbert=HilbertParams(int(cfg.get("order", 6)), int(cfg.get("step", 10))),
        tau=float(cfg.get("tau", 0.5)),
        K=int(cfg.get("neighbours", cfg.get("k_neighbours", 10))),
        top_n=int(cfg.get("top_n", 10)),
        seed=int(seed if seed is not None else cfg.get("seed", 0)),
        policy=ServicePolicy(cfg.get("purpose", "recommendation"), cfg.get("recipients", "super_peer_only"),
                             int(cfg.get("retention", 30))),
        category=cfg.get("category") or None,
        n_released=int(cfg.get("released", 20)),
        min_overlap=int(cfg.get("min_overlap", 3)),
        alpha=float(cfg.get("alpha", 0.2)),
        target_is_super_peer=_BOOL[cfg.get("target_is_super_peer", "false").lower()],
        taxonomy=taxonomy,
        now=now,
    )


def cmd_simulate(args) -> int:
    if not args.config:
        raise ValueError("--config is required")
    config = config_from_file(args.config, args.seed)
    config.validate()
    transcript = run_session(config)
    if args.out:
        transcript.write(args.out)
    else:
        sys.stdout.write(transcript.dumps())
    if transcript.aborted:
        print(f"session aborted: {transcript.reason}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def cmd_recommend(args) -> int:
    ds = _load(args)
    users = [int(u) if u.isdigit() else u for u in args.user_list.split(",")] if args.user_list else ds.users()[:args.group_size]
    keep = set(users)
    sub = ds.with_ratings([r for r in ds.ratings if r.user in keep])
    if not sub.ratings:
        raise DataError("none of the requested users has ratings")
    seed = _ints(args.seeds)[0]
    key, concealed = conceal_all(sub, ConcealmentParams(args.evs_d_dim or 500, args.sigma0), seed)
    group = build_group_profile(concealed, key, sub.m)
    orders, steps = _ints(args.orders or "9"), _ints(args.steps or "10")
    group = conceal_global(group, HilbertParams(orders[0], steps[0]), seed)
    referrals = recommend(group, None, args.top_n, args.k, sealed_to=args.target)
    if args.out:
        write_referrals(referrals, args.out)
    else:
        for rank, (item, pred) in enumerate(referrals.entries, 1):
            print(f"{rank},{item},{pred:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="collabpriv", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp):
        sp.add_argument("--data", help="ratings file (u.data, or user,item,rating CSV)")
        sp.add_argument("--items", help="item file (u.item, or item,f1,...,fk CSV)")
        sp.add_argument("--format", choices=["movielens", "csv"], default="movielens")
        sp.add_argument("--out")

    def sweep_flags(sp):
        sp.add_argument("--seeds", default="0,1,2,3,4")
        sp.add_argument("--sigma0", type=float, default=0.5)
        sp.add_argument("--test-fraction", type=float, default=0.2)
        sp.add_argument("--k", type=int, default=10, help="CF neighbourhood size")
        sp.add_argument("--users", type=int, default=200, help="subset: most active users")
        sp.add_argument("--n-items", type=int, default=400, help="subset: most rated items")

    sp = sub.add_parser("ingest", help="load a dataset, print a summary, optionally export CSV")
    data_flags(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("sweep-cta", help="MAE / VI over d_dim")
    data_flags(sp)
    sweep_flags(sp)
    sp.add_argument("--d-dim", default="100,200,300,400,500,600")
    sp.set_defaults(func=cmd_sweep_cta)

    sp = sub.add_parser("sweep-evs", help="MAE / VI over Hilbert order and step length")
    data_flags(sp)
    sweep_flags(sp)
    sp.add_argument("--orders", default="3,6,9")
    sp.add_argument("--steps", default="10,20,30,40,50,60,70,80")
    sp.add_argument("--d-dim", dest="evs_d_dim", type=int, default=500, help="CTA dimension feeding EVS")
    sp.set_defaults(func=cmd_sweep_evs)

    sp = sub.add_parser("simulate", help="run one protocol session from a key=value config")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("recommend", help="conceal a group of users and print its referral list")
    data_flags(sp)
    sweep_flags(sp)
    sp.add_argument("--user-list", help="comma-separated user ids forming the group")
    sp.add_argument("--group-size", type=int, default=5)
    sp.add_argument("--target", default=None, help="pseudonym the referrals are sealed to")
    sp.add_argument("--orders")
    sp.add_argument("--steps")
    sp.add_argument("--d-dim", dest="evs_d_dim", type=int, default=500)
    sp.add_argument("--top-n", type=int, default=10)
    sp.add_argument("--tau", type=float, default=0.5, help="accepted for symmetry with simulate; unused")
    sp.set_defaults(func=cmd_recommend)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (DataError, PolicyError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
