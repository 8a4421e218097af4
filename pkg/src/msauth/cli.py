"""Command-line front end over file-backed state.

State lives in one directory:

    config.json        seed, deltas, skew, latency, start time (editable)
    state.json         step counter and simulated clock (managed)
    ra.json            RA records; the master secret is never written
    servers/<id>.json  one file per server
    cards/<id>.json    one file per issued card
    transcript.ndjson  every frame sent, open and secure channel

Every mutating command draws randomness from ``seed:step`` and bumps the
step, so a command sequence replayed against a fresh directory with the same
config produces byte-identical files.  Passwords come from flags or
environment variables and are never written or printed; session keys are
shown only as fingerprints.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import cost
from .adversary import scenarios
from .core import RandomSource, identity
from .errors import NonpositiveParameter, ProtocolError
from .ra import RegistrationAuthority, SmartCard, server_prepare_registration, user_prepare_registration
from .server import ServerState
from .sim import Faults, User, World

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_ATTACK = 3
EXIT_CONFIG = 4

DEFAULT_CONFIG = {
    "seed": 0,
    "delta1": 5,
    "delta2": 5,
    "latency": 1,
    "start_time": 1_700_000_000,
    "skew": {},
}
SECRET_ENV = "MSAUTH_RA_SECRET"


class ConfigError(Exception):
    pass


def fingerprint(key: bytes) -> str:
    return hashlib.sha256(b"sk-fingerprint" + key).hexdigest()[:16]


class Store:
    def __init__(self, root: str | Path, overrides: Optional[dict] = None):
        self.root = Path(root)
        self.config = dict(DEFAULT_CONFIG)
        cfg_path = self.root / "config.json"
        if cfg_path.exists():
            try:
                self.config.update(json.loads(cfg_path.read_text()))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read {cfg_path}: {e}") from e
        for k, v in (overrides or {}).items():
            if v is not None:
                self.config[k] = v
        seed = self.config["seed"]
        if isinstance(seed, str) and seed.lstrip("-").isdigit():
            self.config["seed"] = int(seed)
        for k in ("delta1", "delta2"):
            if int(self.config[k]) <= 0:
                raise ConfigError(f"{k} must be > 0")
        self.state = {"step": 0, "clock": int(self.config["start_time"])}
        st_path = self.root / "state.json"
        if st_path.exists():
            self.state.update(json.loads(st_path.read_text()))
        self._writes: dict[Path, str] = {}
        self._appends: dict[Path, str] = {}

    # -- randomness and secrets

    def source(self) -> RandomSource:
        return RandomSource(f"{self.config['seed']}:{self.state['step']}")

    def ra_secret(self) -> bytes:
        env = os.environ.get(SECRET_ENV)
        if env:
            try:
                return bytes.fromhex(env)
            except ValueError as e:
                raise ConfigError(f"{SECRET_ENV} is not hex") from e
        return RandomSource(f"{self.config['seed']}:ra-secret").bytes(8)

    # -- loading

    def load_ra(self, source: RandomSource) -> RegistrationAuthority:
        path = self.root / "ra.json"
        if not path.exists():
            return RegistrationAuthority(source, x=self.ra_secret())
        return RegistrationAuthority.from_json(path.read_text(), source, x=self.ra_secret())

    def load_servers(self) -> dict[bytes, ServerState]:
        out = {}
        d = self.root / "servers"
        if d.exists():
            for f in sorted(d.glob("*.json")):
                s = ServerState.from_json(f.read_text())
                out[s.id] = s
        return out

    def load_card(self, uid: bytes) -> SmartCard:
        path = self.root / "cards" / f"{uid.hex()}.json"
        if not path.exists():
            raise ConfigError(f"no card for user {uid.hex()} in {self.root}")
        return SmartCard.from_json(path.read_text())

    # -- staged writes; nothing touches disk until commit()

    def put(self, rel: str, text: str) -> None:
        self._writes[self.root / rel] = text

    def append(self, rel: str, text: str) -> None:
        p = self.root / rel
        self._appends[p] = self._appends.get(p, "") + text

    def put_ra(self, ra: RegistrationAuthority) -> None:
        self.put("ra.json", ra.to_json(include_secret=False) + "\n")

    def put_server(self, s: ServerState) -> None:
        self.put(f"servers/{s.id.hex()}.json", s.to_json() + "\n")

    def put_card(self, uid: bytes, card: SmartCard) -> str:
        rel = f"cards/{uid.hex()}.json"
        self.put(rel, card.to_json() + "\n")
        return rel

    def commit(self, clock: Optional[int] = None) -> None:
        self.state["step"] += 1
        if clock is not None:
            self.state["clock"] = clock
        self.put("state.json", json.dumps(self.state, sort_keys=True) + "\n")
        cfg = self.root / "config.json"
        if not cfg.exists():
            self.put("config.json", json.dumps(self.config, sort_keys=True, indent=2) + "\n")
        try:
            for p, text in self._writes.items():
                p.parent.mkdir(parents=True, exist_ok=True)
                tmp = p.with_suffix(p.suffix + ".tmp")
                tmp.write_text(text)
                os.replace(tmp, p)
            for p, text in self._appends.items():
                p.parent.mkdir(parents=True, exist_ok=True)
                with open(p, "a") as f:
                    f.write(text)
        except OSError as e:
            raise ConfigError(f"cannot write state: {e}") from e


def _password(args, flag: str = "password") -> bytes:
    value = getattr(args, flag, None)
    env = getattr(args, f"{flag}_env", None)
    if env:
        value = os.environ.get(env)
        if value is None:
            raise ConfigError(f"environment variable {env} is not set")
    if value is None:
        raise ConfigError(f"--{flag.replace('_', '-')} or --{flag.replace('_', '-')}-env is required")
    return value.encode("utf-8")


def _say(args, *lines: str) -> None:
    for line in lines:
        print(line)


# -- commands


def cmd_register_server(args, store: Store) -> int:
    sid = identity(args.server)
    src = store.source()
    ra = store.load_ra(src)
    servers = store.load_servers()
    alpha = server_prepare_registration(sid, _password(args), src)
    state = ServerState(id=sid, alpha=b"", beta=b"", delta1=int(store.config["delta1"]))
    rec = ra.register_server(sid, alpha, storage=state)
    state.alpha, state.beta = rec.alpha, rec.beta
    store.put_ra(ra)
    store.put_server(state)
    store.append("transcript.ndjson", _secure_line(f"S:{sid.hex()}", "RA", store.state["clock"], sid + alpha))
    store.commit()
    _say(args, f"server {sid.hex()} registered", f"users provisioned: {len(state.f_table)}",
         f"servers known to RA: {len(servers) + 1}")
    return EXIT_OK


def _secure_line(sender: str, recipient: str, t: int, payload: bytes) -> str:
    # secure-channel payloads are logged by length and digest only
    return json.dumps({
        "direction": f"{sender}->{recipient}",
        "channel": "secure",
        "bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "time": t,
    }, sort_keys=True) + "\n"


def cmd_register_user(args, store: Store) -> int:
    uid = identity(args.user)
    src = store.source()
    ra = store.load_ra(src)
    servers = store.load_servers()
    for sid, s in servers.items():
        ra.attach(sid, s)
    req, _ = user_prepare_registration(uid, _password(args), src)
    iss = ra.register_user(req)
    store.put_ra(ra)
    for s in servers.values():
        store.put_server(s)
    rel = store.put_card(uid, iss.card)
    t = store.state["clock"]
    store.append("transcript.ndjson", _secure_line(f"U:{uid.hex()}", "RA", t, req.id + req.A + req.B)
                 + _secure_line("RA", f"U:{uid.hex()}", t, iss.card.to_bytes()))
    store.commit()
    _say(args, f"user {uid.hex()} registered", f"card written to {rel} ({len(iss.card.to_bytes())} bytes)",
         f"F value pushed to {len(servers)} server(s)")
    return EXIT_OK


def _world(store: Store, faults: Faults = Faults()) -> World:
    cfg = store.config
    w = World(
        seed=f"{cfg['seed']}:{store.state['step']}",
        delta1=int(cfg["delta1"]),
        delta2=int(cfg["delta2"]),
        start_time=int(store.state["clock"]),
        latency=int(cfg["latency"]),
        faults=faults,
    )
    w.clock.skew.update({k: int(v) for k, v in cfg.get("skew", {}).items()})
    w.servers = store.load_servers()
    return w


def cmd_auth(args, store: Store) -> int:
    uid, sid = identity(args.user), identity(args.server)
    w = _world(store)
    if sid not in w.servers:
        raise ConfigError(f"server {sid.hex()} is not registered")
    card = store.load_card(uid)
    user = User(args.user, uid, _password(args), card, issuance=None)
    w.users[uid] = user
    out = w.login(user, sid)
    for rec in w.network.transcript[out.transcript_start:]:
        store.append("transcript.ndjson", json.dumps(rec.to_json(), sort_keys=True) + "\n")
    store.commit(clock=w.clock.now)
    nbytes = w.network.open_bytes(out.transcript_start)
    if out.request is not None:
        _say(args, f"T1 = {out.request.t1} (sim seconds)")
    if out.response is not None:
        _say(args, f"T2 = {out.response.t2} (sim seconds)")
    _say(args, f"open-channel traffic: {nbytes} bytes")
    if out.server_errors:
        _say(args, f"server rejected: {out.server_errors[0].code}")
        return EXIT_REJECTED
    if out.card_error is not None:
        _say(args, f"card rejected: {out.card_error.code}")
        return EXIT_REJECTED
    fc, fs = fingerprint(out.card_key.key), fingerprint(out.server_key.key)
    _say(args, f"card   SK fingerprint {fc}", f"server SK fingerprint {fs}")
    if fc != fs:
        _say(args, "SK fingerprints differ")
        return EXIT_REJECTED
    _say(args, "SK fingerprints match")
    return EXIT_OK


def cmd_update_password(args, store: Store) -> int:
    from . import card as card_ops

    uid = identity(args.user)
    card = store.load_card(uid)
    card_ops.update_password(card, uid, _password(args), _password(args, "new_password"))
    rel = store.put_card(uid, card)
    store.commit()
    _say(args, f"password updated on card {rel}; no server state touched")
    return EXIT_OK


MUTATIONS = {
    "skip-j": Faults(skip_j_check=True),
    "skip-m": Faults(skip_m_check=True),
    "skip-freshness": Faults(skip_freshness=True),
}


def cmd_attack(args, store: Store) -> int:
    names = list(scenarios.TITLES) if args.scenario == "all" else [args.scenario.upper()]
    for n in names:
        if n not in scenarios.TITLES:
            raise ConfigError(f"unknown scenario {args.scenario!r}; expected A1..A7 or all")
    faults = MUTATIONS[args.mutation] if args.mutation else Faults()
    results = [
        scenarios.run_scenario(
            n,
            seed=store.config["seed"],
            faults=faults,
            strict_replay=args.strict_replay,
            depth=args.depth,
            sid_public=not args.sid_private,
            identities_public=not args.sid_private,
            a3_with_card=not args.transcript_only,
        )
        for n in names
    ]
    unexpected = []
    for r in results:
        expected = "succeeded" if args.mutation else "prevented"
        mark = "as expected" if r.verdict == expected or args.mutation else "UNEXPECTED"
        _say(args, f"{r.scenario} {r.title}: {r.verdict} ({mark})")
        for a in r.attempts:
            _say(args, f"    attempt: {a.name}: {'BREACH' if a.breached else 'rejected'} [{a.detail}]")
        for g in r.goals:
            if g.derivable:
                _say(args, f"    derivable goal: {g.label}")
        for f in r.findings:
            _say(args, f"    finding: {f}")
        if not args.mutation and r.verdict != "prevented":
            unexpected.append(r.scenario)
    prevented = sum(r.prevented for r in results)
    _say(args, f"{prevented}/{len(results)} prevented")
    if args.json:
        _write(args.json, scenarios.results_json(results) + "\n")
    if args.mutation:
        # a mutation run is expected to expose at least one breach
        return EXIT_OK if prevented < len(results) else EXIT_ATTACK
    return EXIT_ATTACK if unexpected else EXIT_OK


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from e


def _reports(args, store: Store) -> dict:
    phases = cost.PHASES if getattr(args, "phase", "all") == "all" else (args.phase,)
    reps = {p: cost.measure_phase(p, seed=store.config["seed"]) for p in phases}
    if args.voltage is not None or args.current is not None:
        if args.voltage is None or args.current is None:
            raise ConfigError("--voltage and --current go together")
        reps = {p: r.with_energy(args.voltage, args.current, args.data_rate) for p, r in reps.items()}
    return reps


def cmd_bench(args, store: Store) -> int:
    reps = _reports(args, store)
    text = cost.reports_csv(reps) if args.format == "csv" else cost.reports_json(reps) + "\n"
    _write(args.out or "-", text)
    return EXIT_OK


def cmd_report(args, store: Store) -> int:
    args.phase = "all"
    reps = _reports(args, store)
    comp = cost.compare(reps, cost.BaselineTable.load(args.baselines))
    if args.format == "csv":
        text = cost.reports_csv(reps) + "\n" + cost.comparison_csv(comp)
    else:
        text = cost.reports_json(reps, comp) + "\n"
    _write(args.out or "-", text)
    return EXIT_OK


# -- parser


def _add_password(p: argparse.ArgumentParser, flag: str = "password") -> None:
    dash = flag.replace("_", "-")
    g = p.add_mutually_exclusive_group()
    g.add_argument(f"--{dash}", dest=flag, help="password value")
    g.add_argument(f"--{dash}-env", dest=f"{flag}_env", metavar="VAR", help="read the password from this variable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msauth", description=__doc__.split("\n\n")[0])
    ap.add_argument("--state", default=os.environ.get("MSAUTH_STATE", "msauth-state"),
                    help="state directory (default: ./msauth-state or $MSAUTH_STATE)")
    ap.add_argument("--seed", help="override config seed")
    ap.add_argument("--delta1", type=int, help="request freshness window, seconds")
    ap.add_argument("--delta2", type=int, help="response freshness window, seconds")
    ap.add_argument("--skew", action="append", metavar="ACTOR=SECONDS",
                    help="clock skew for card or server (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register-server", help="enroll a server with the RA")
    p.add_argument("server")
    _add_password(p)
    p.set_defaults(func=cmd_register_server, password="server-pw")

    p = sub.add_parser("register-user", help="enroll a user and issue a card")
    p.add_argument("user")
    _add_password(p)
    p.set_defaults(func=cmd_register_user)

    p = sub.add_parser("auth", help="run one login and key agreement")
    p.add_argument("user")
    p.add_argument("server")
    _add_password(p)
    p.set_defaults(func=cmd_auth)

    p = sub.add_parser("update-password", help="change the password on a card")
    p.add_argument("user")
    _add_password(p)
    _add_password(p, "new_password")
    p.set_defaults(func=cmd_update_password)

    p = sub.add_parser("attack", help="run attack scenarios A1..A7 in an isolated world")
    p.add_argument("scenario", help="A1..A7 or all")
    p.add_argument("--json", metavar="PATH", help="write scenario results as JSON ('-' for stdout)")
    p.add_argument("--mutation", choices=sorted(MUTATIONS), help="break one verifier check")
    p.add_argument("--strict-replay", action="store_true", help="enable the server's seen-request cache")
    p.add_argument("--sid-private", action="store_true", help="treat server and user identities as unknown")
    p.add_argument("--transcript-only", action="store_true", help="password guessing without the stolen card")
    p.add_argument("--depth", type=int, default=scenarios.DEFAULT_DEPTH, help="hash nesting bound")
    p.set_defaults(func=cmd_attack)

    for name, helptext, func in (("bench", "measure one phase", cmd_bench),
                                 ("report", "cost report with baseline comparison", cmd_report)):
        p = sub.add_parser(name, help=helptext)
        if name == "bench":
            p.add_argument("phase", choices=list(cost.PHASES) + ["all"])
        else:
            p.add_argument("--baselines", help="alternative baseline data file")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--voltage", type=float, help="volts, for energy figures")
        p.add_argument("--current", type=float, help="amps, for energy figures")
        p.add_argument("--data-rate", type=float, default=cost.DEFAULT_DATA_RATE, help="bits per second")
        p.set_defaults(func=func)
    return ap


def _skew(items) -> Optional[dict]:
    if not items:
        return None
    out = {}
    for item in items:
        actor, _, secs = item.partition("=")
        try:
            out[actor] = int(secs)
        except ValueError as e:
            raise ConfigError(f"bad --skew {item!r}; expected ACTOR=SECONDS") from e
    return out


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"seed": args.seed, "delta1": args.delta1, "delta2": args.delta2, "skew": _skew(args.skew)}
        store = Store(args.state, overrides)
        return args.func(args, store)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonpositiveParameter as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as e:
        print(f"rejected: {e.code}: {e}", file=sys.stderr)
        return EXIT_REJECTED
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
