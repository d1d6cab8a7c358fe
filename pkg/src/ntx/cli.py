"""``ntx`` command line: segment, charges, transfer, compare-seg, batch."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import charge as chg
from . import diagram as dia
from . import segmentation as seg
from . import transfer as trf
from .cube_io import CubeFormatError, GridField, read_cube, save_cube
from .molecule import GroupConfigError, MoleculeSpec, build_molecule, load_group_config

log = logging.getLogger("ntx")

METHODS = ("proportional", "quadratic")
FORMATS = ("csv", "json", "svg")
DIFF_THRESHOLD = 2.0  # percentage points


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    hole: Optional[Path] = None
    particle: Optional[Path] = None
    groups: Optional[Path] = None
    charges: Optional[Path] = None
    record: Optional[str] = None
    method: str = "both"
    tp: Optional[list[float]] = None
    out: Path = Path("ntx_out")
    formats: tuple[str, ...] = FORMATS
    seg: str = "power"
    name: Optional[str] = None
    colors: dict = field(default_factory=dict)
    diagram: dia.DiagramOptions = field(default_factory=dia.DiagramOptions)
    workers: Optional[int] = None

    def validate(self, need_cubes=True):
        if self.method not in METHODS + ("both",):
            raise InputError(f"unknown method {self.method!r}")
        if self.seg not in ("power", "gradient", "both"):
            raise InputError(f"unknown segmentation {self.seg!r}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise InputError(f"unknown report format(s): {', '.join(bad)}")
        if need_cubes and self.charges is None:
            for what in ("hole", "particle", "groups"):
                p = getattr(self, what)
                if p is None:
                    raise InputError(f"--{what} is required")
                if not Path(p).exists():
                    raise InputError(f"{what} file not found: {p}")
        elif self.charges is not None and not Path(self.charges).exists():
            raise InputError(f"charges file not found: {self.charges}")

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "both" else (self.method,)


@dataclass
class Inputs:
    hole: GridField
    particle: GridField
    molecule: MoleculeSpec


def load_inputs(cfg: RunConfig) -> Inputs:
    """Parse and cross-check every input before any computation."""
    cfg.validate()
    try:
        hole, atoms_h = read_cube(cfg.hole)
        particle, atoms_p = read_cube(cfg.particle)
        groups = load_group_config(cfg.groups)
        mol = build_molecule(atoms_h, groups)
    except (CubeFormatError, GroupConfigError) as exc:
        raise InputError(str(exc)) from exc
    if not hole.same_grid(particle):
        raise InputError(f"hole grid {hole.axis_counts} and particle grid {particle.axis_counts} differ")
    if len(atoms_h) != len(atoms_p) or any(
        a.atomic_number != b.atomic_number or not np.allclose(a.position, b.position, atol=1e-6)
        for a, b in zip(atoms_h, atoms_p)
    ):
        raise InputError("hole and particle cubes list different atoms")
    return Inputs(hole, particle, mol)


def _labels(inp: Inputs, kind: str, which: str = "hole", workers=None) -> seg.LabelVolume:
    if kind == "power":
        return seg.segment_power_diagram(inp.hole, inp.molecule, workers=workers)
    field_ = inp.hole if which == "hole" else inp.particle
    return seg.segment_gradient_ascent(chg.density(field_), inp.molecule)


def _write(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)
    log.info("wrote %s", path)
    return path


def _table_for(inp: Inputs, kind: str, workers=None) -> chg.ChargeTable:
    if kind == "power":
        lv = _labels(inp, "power", workers=workers)
        return chg.charge_table(inp.hole, inp.particle, lv, inp.molecule)
    # gradient labels depend on the field, so each NTO gets its own
    lh = _labels(inp, "gradient", "hole")
    lp = _labels(inp, "gradient", "particle")
    m = inp.molecule
    qh = chg.atom_charges(inp.hole, lh, m.n_atoms)
    qp = chg.atom_charges(inp.particle, lp, m.n_atoms)
    return chg.ChargeTable(qh, qp, chg.subgroup_charges(qh, m), chg.subgroup_charges(qp, m),
                           chg.fixed_order_sum(qh), chg.fixed_order_sum(qp))


# -- stages ----------------------------------------------------------------


def cmd_segment(cfg: RunConfig) -> dict:
    inp = load_inputs(cfg)
    m = inp.molecule
    kinds = ("power", "gradient") if cfg.seg == "both" else (cfg.seg,)
    stats = {"subgroups": m.names, "segmentations": {}}
    atoms = seg.label_cube_atoms(m)
    for kind in kinds:
        volumes = {"": _labels(inp, "power", workers=cfg.workers)} if kind == "power" else {
            "_hole": _labels(inp, "gradient", "hole"),
            "_particle": _labels(inp, "gradient", "particle"),
        }
        for suffix, lv in volumes.items():
            key = kind + suffix
            save_cube(cfg.out / f"labels_{key}.cube", lv.to_field(), atoms)
            stats["segmentations"][key] = {
                "atom_voxels": lv.counts(m.n_atoms).tolist(),
                "subgroup_voxels": seg.subgroup_labels(lv, m).counts(m.n_groups).tolist(),
            }
    _write(cfg.out / "segment_stats.json", json.dumps(stats, indent=2) + "\n")
    return stats


def cmd_charges(cfg: RunConfig) -> chg.ChargeTable:
    inp = load_inputs(cfg)
    table = _table_for(inp, "gradient" if cfg.seg == "gradient" else "power", cfg.workers)
    _emit_charges(cfg, table, inp.molecule)
    return table


def _emit_charges(cfg, table, m):
    if "csv" in cfg.formats:
        _write(cfg.out / "charges.csv", chg.charge_table_to_csv(table, m))
    if "json" in cfg.formats:
        _write(cfg.out / "charges.json", chg.charge_table_to_json(table, m))
    if "svg" in cfg.formats:
        _write(cfg.out / "charges_bar.svg", dia.render_bar_chart(
            table.per_subgroup_hole, table.per_subgroup_particle, m.names,
            dia.resolve_colors(m.names, m.colors, cfg.colors)))


def load_charge_record(path, record: Optional[str] = None) -> dict:
    """Subgroup charges from JSON: one record, or {"records": [...]} picked by id."""
    doc = json.loads(Path(path).read_text())
    if "records" in doc:
        recs = doc["records"]
        if record is None:
            if len(recs) != 1:
                raise InputError(f"{path} holds {len(recs)} records; pick one with --record")
            return recs[0]
        for r in recs:
            if r.get("id") == record:
                return r
        raise InputError(f"record {record!r} not found in {path}")
    return doc


def _percent(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    total = chg.fixed_order_sum(v)
    if not total > 0:
        raise InputError("subgroup charges sum to zero")
    return v * (100.0 / total)


def check_transfer(r: trf.TransferResult, tol=trf.CONSTRAINT_TOL) -> list[str]:
    problems = []
    if r.T.size and r.T.min() < 0:
        problems.append("negative transfer")
    if r.row_residual > tol or r.col_residual > tol:
        problems.append(f"constraint residual row={r.row_residual:.3g} col={r.col_residual:.3g}")
    Q = r.full_matrix
    p = r.partition
    if np.max(np.abs(Q.sum(axis=1) - p.hole)) > tol or np.max(np.abs(Q.sum(axis=0) - p.particle)) > tol:
        problems.append("full matrix marginals do not reproduce hole/particle charges")
    return problems


def cmd_transfer(cfg: RunConfig) -> dict:
    """Transfer matrices (+ diagrams) from cubes or from a subgroup charge file."""
    if cfg.charges is not None:
        cfg.validate(need_cubes=False)
        rec = load_charge_record(cfg.charges, cfg.record)
        names = list(rec["subgroups"])
        colors = rec.get("colors") or [None] * len(names)
        qh, qp = _percent(rec["hole"]), _percent(rec["particle"])
        m = None
    else:
        inp = load_inputs(cfg)
        m = inp.molecule
        table = _table_for(inp, "gradient" if cfg.seg == "gradient" else "power", cfg.workers)
        _emit_charges(cfg, table, m)
        pct = chg.normalize_percent(table)
        names, colors = m.names, m.colors
        qh, qp = pct.per_subgroup_hole, pct.per_subgroup_particle
    try:
        part = trf.partition_donors_acceptors(qh, qp)
    except trf.TransferError as exc:
        raise InputError(str(exc)) from exc
    colors = dia.resolve_colors(names, colors, cfg.colors)

    results, problems = {}, []
    for method in cfg.methods:
        tp = cfg.tp if method == "quadratic" else None
        if tp is not None and len(tp) != part.n * part.m:
            raise InputError(f"--tp has {len(tp)} values, this input needs n*m = {part.n * part.m}")
        r = trf.solve(part, method, tp)
        results[method] = r
        problems += [f"{method}: {p}" for p in check_transfer(r)]
        if "json" in cfg.formats:
            _write(cfg.out / f"transfer_{method}.json", trf.transfer_to_json(r, names))
        if "svg" in cfg.formats:
            opts = cfg.diagram if cfg.diagram.title or not cfg.name else replace(cfg.diagram, title=cfg.name)
            spec = dia.layout_transition_diagram(r.full_matrix, names, colors, opts)
            _write(cfg.out / f"transition_{method}.svg", dia.render_svg(spec))
        if r.local_excitation_only:
            log.info("%s: pure local excitation (no donors)", method)
    if "csv" in cfg.formats:
        lines = ["method,from,to,value"]
        for method, r in results.items():
            for i in range(len(names)):
                for j in range(len(names)):
                    lines.append(f"{method},{names[i]},{names[j]},{r.full_matrix[i, j]!r}")
        _write(cfg.out / "transfer_matrix.csv", "\n".join(lines) + "\n")
    return {"results": results, "names": names, "colors": colors, "problems": problems}


def compare_rows(names, power: chg.ChargeTable, grad: chg.ChargeTable, threshold=DIFF_THRESHOLD) -> list[dict]:
    pw, gr = chg.normalize_percent(power), chg.normalize_percent(grad)
    rows = []
    for j, name in enumerate(names):
        row = {"subgroup": name}
        for key, a, b in (("hole", pw.per_subgroup_hole[j], gr.per_subgroup_hole[j]),
                          ("particle", pw.per_subgroup_particle[j], gr.per_subgroup_particle[j])):
            row[f"{key}_power"] = float(a)
            row[f"{key}_gradient"] = float(b)
            row[f"{key}_diff"] = float(abs(a - b))
            row[f"{key}_exceeds"] = bool(abs(a - b) > threshold)
        rows.append(row)
    return rows


def format_compare_report(rows, threshold=DIFF_THRESHOLD) -> str:
    head = f"{'subgroup':<12}{'Qh_pow':>9}{'Qh_grad':>9}{'|dQh|':>8}  {'Qp_pow':>9}{'Qp_grad':>9}{'|dQp|':>8}"
    lines = [head, "-" * len(head)]
    exceed = 0
    for r in rows:
        mh = "*" if r["hole_exceeds"] else " "
        mp = "*" if r["particle_exceeds"] else " "
        exceed += r["hole_exceeds"] + r["particle_exceeds"]
        lines.append(
            f"{r['subgroup']:<12}{r['hole_power']:8.1f}%{r['hole_gradient']:8.1f}%{r['hole_diff']:7.1f}%{mh} "
            f"{r['particle_power']:8.1f}%{r['particle_gradient']:8.1f}%{r['particle_diff']:7.1f}%{mp}"
        )
    lines.append("")
    lines.append(f"{exceed} such cases out of {2 * len(rows)} differ by more than {threshold:g} percentage points (marked *)")
    return "\n".join(lines) + "\n"


def cmd_compare_seg(cfg: RunConfig) -> dict:
    inp = load_inputs(cfg)
    power = _table_for(inp, "power", cfg.workers)
    grad = _table_for(inp, "gradient")
    rows = compare_rows(inp.molecule.names, power, grad)
    report = format_compare_report(rows)
    exceed = sum(r["hole_exceeds"] + r["particle_exceeds"] for r in rows)
    doc = {"threshold_pp": DIFF_THRESHOLD, "rows": rows, "exceed_count": exceed, "total": 2 * len(rows)}
    if "json" in cfg.formats:
        _write(cfg.out / "compare_seg.json", json.dumps(doc, indent=2) + "\n")
    _write(cfg.out / "compare_seg.txt", report)
    sys.stdout.write(report)
    return doc


def _batch_item(item: dict, base: RunConfig, root: Path, here: Path) -> RunConfig:
    def path(key):
        v = item.get(key)
        return None if v is None else (here / v if not Path(v).is_absolute() else Path(v))

    name = item.get("name") or f"item{item['_index']}"
    return replace(
        base,
        hole=path("hole"), particle=path("particle"), groups=path("groups"),
        charges=path("charges"), record=item.get("record"),
        method=item.get("method", base.method), tp=item.get("tp", base.tp),
        out=root / name, name=name,
    )


def cmd_batch(configs: list[RunConfig], out: Path) -> tuple[dict, bool]:
    """Run transfer for a series; one failing item doesn't stop the others."""
    # one color per subgroup name across the whole series
    palette = {}
    summary = {"items": []}
    ok = True
    for cfg in configs:
        entry = {"name": cfg.name, "status": "ok"}
        try:
            names = _names_for(cfg)
            for nm in names:
                if nm not in palette:
                    palette[nm] = cfg.colors.get(nm) or dia.DEFAULT_COLORS[len(palette) % len(dia.DEFAULT_COLORS)]
            res = cmd_transfer(replace(cfg, colors={**palette, **cfg.colors}))
            entry["subgroups"] = res["names"]
            entry["transfers"] = {
                method: trf.transfer_to_dict(r, res["names"]) for method, r in res["results"].items()
            }
            if res["problems"]:
                entry["status"] = "invariant-violation"
                entry["problems"] = res["problems"]
                ok = False
        except Exception as exc:  # noqa: BLE001 - recorded per item
            entry["status"] = "failed"
            entry["error"] = f"{type(exc).__name__}: {exc}"
            ok = False
        summary["items"].append(entry)
    summary["colors"] = palette
    summary["failed"] = sum(e["status"] != "ok" for e in summary["items"])
    _write(out / "batch_summary.json", json.dumps(summary, indent=2) + "\n")
    return summary, ok


def _names_for(cfg: RunConfig) -> list[str]:
    if cfg.charges is not None:
        return list(load_charge_record(cfg.charges, cfg.record)["subgroups"])
    cfg.validate()
    doc = load_group_config(cfg.groups)
    groups = doc["groups"] if isinstance(doc, dict) and "groups" in doc else (
        [{"name": k} for k in doc] if isinstance(doc, dict) else doc)
    return [str(g["name"]) for g in groups]


# -- argument parsing ------------------------------------------------------


def _parse_tp(text: Optional[str]):
    if text is None:
        return None
    p = Path(text)
    if p.exists():
        vals = json.loads(p.read_text())
    else:
        vals = [float(x) for x in text.split(",") if x.strip()]
    return [float(v) for v in np.asarray(vals, dtype=float).ravel()]


def _parse_colors(items):
    out = {}
    for item in items or []:
        name, _, color = item.partition("=")
        if not color:
            raise InputError(f"--color expects NAME=#rrggbb, got {item!r}")
        out[name] = color
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ntx", description="Charge localization and transfer from hole/particle NTO cubes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, cubes_required=True):
        p.add_argument("--hole", type=Path, help="hole NTO cube file")
        p.add_argument("--particle", type=Path, help="particle NTO cube file")
        p.add_argument("--groups", type=Path, help="subgroup config (JSON)")
        p.add_argument("--out", type=Path, default=Path("ntx_out"), help="output directory")
        p.add_argument("--format", default=",".join(FORMATS), help="comma list of csv,json,svg")
        p.add_argument("--seg", default="power", choices=("power", "gradient", "both"))
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: NTX_THREADS or CPU count)")

    p = sub.add_parser("segment", help="label voxels by atom")
    common(p)
    p = sub.add_parser("charges", help="per-atom and per-subgroup charges")
    common(p)
    p = sub.add_parser("transfer", help="transfer matrix and transition diagram")
    common(p)
    p.add_argument("--charges", type=Path, help="subgroup charge JSON instead of cubes")
    p.add_argument("--record", help="record id inside a multi-record charge file")
    p.add_argument("--method", default="both", choices=METHODS + ("both",))
    p.add_argument("--tp", help="preferred transfer, comma list or JSON file (row-major donors x acceptors)")
    p.add_argument("--width", type=float, default=dia.DiagramOptions.width)
    p.add_argument("--height", type=float, default=dia.DiagramOptions.height)
    p.add_argument("--epsilon", type=float, default=dia.DiagramOptions.epsilon, help="hide ribbons below this many percentage points")
    p.add_argument("--color", action="append", metavar="NAME=#RRGGBB", help="override a subgroup color")
    p.add_argument("--title")
    p = sub.add_parser("compare-seg", help="power diagram vs gradient ascent subgroup charges")
    common(p)
    p = sub.add_parser("batch", help="transfer for a series of molecules")
    p.add_argument("config", type=Path, help="JSON: {\"items\": [{name, hole, particle, groups | charges, record}], ...}")
    p.add_argument("--out", type=Path, default=Path("ntx_batch"))
    p.add_argument("--method", default="both", choices=METHODS + ("both",))
    p.add_argument("--format", default=",".join(FORMATS))
    p.add_argument("--threads", type=int, default=None)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        hole=getattr(args, "hole", None),
        particle=getattr(args, "particle", None),
        groups=getattr(args, "groups", None),
        charges=getattr(args, "charges", None),
        record=getattr(args, "record", None),
        method=getattr(args, "method", "both"),
        tp=_parse_tp(getattr(args, "tp", None)),
        out=args.out,
        formats=tuple(f.strip() for f in args.format.split(",") if f.strip()),
        seg=getattr(args, "seg", "power"),
        colors=_parse_colors(getattr(args, "color", None)),
        workers=getattr(args, "threads", None),
    )
    if args.command == "transfer":
        cfg.diagram = dia.DiagramOptions(width=args.width, height=args.height, epsilon=args.epsilon, title=args.title)
        cfg.name = args.title
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="ntx: %(levelname)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "segment":
            cmd_segment(cfg)
        elif args.command == "charges":
            cmd_charges(cfg)
        elif args.command == "transfer":
            res = cmd_transfer(cfg)
            for p in res["problems"]:
                log.error("invariant check failed: %s", p)
            return 1 if res["problems"] else 0
        elif args.command == "compare-seg":
            cmd_compare_seg(cfg)
        elif args.command == "batch":
            doc = json.loads(args.config.read_text())
            items = doc["items"] if isinstance(doc, dict) else doc
            if not items:
                raise InputError("batch config has no items")
            base = replace(cfg, method=doc.get("method", cfg.method) if isinstance(doc, dict) else cfg.method)
            here = args.config.resolve().parent
            configs = [_batch_item({**it, "_index": k}, base, args.out, here) for k, it in enumerate(items)]
            summary, ok = cmd_batch(configs, args.out)
            for e in summary["items"]:
                if e["status"] != "ok":
                    log.error("%s: %s", e["name"], e.get("error") or "; ".join(e.get("problems", [])))
            return 0 if ok else 1
    except (InputError, trf.TransferError, trf.QPFailure, CubeFormatError, GroupConfigError) as exc:
        print(f"ntx: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
