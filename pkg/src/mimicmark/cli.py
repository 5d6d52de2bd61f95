"""Command-line interface.

Thin client over the core package: each subcommand parses flags, calls
library functions, writes a reproducible run report, and exits with
0 = success, 1 = usage error, 2 = data error, 3 = theft detected under
``verify --fail-on-theft``.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import attacks, channel, registry, reports, verify, watermark
from .errors import MimicmarkError
from .imagecore import load_image, save_image

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_THEFT = 3

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
_MAX_WORKERS = 8


class _UsageError(Exception):
    pass


def _list_images(directory: str) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise _UsageError(f"not a directory: {directory}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def _read_key(args) -> bytes:
    if getattr(args, "key_hex", None):
        return bytes.fromhex(args.key_hex)
    if getattr(args, "key", None):
        text = Path(args.key).read_text().strip()
        return bytes.fromhex(text)
    raise _UsageError("a key is required: --key FILE or --key-hex HEX")


def _codec_from_args(args) -> tuple[watermark.CodecConfig, watermark.WatermarkPayload]:
    """Resolve codec + payload from either a registry record or explicit flags."""
    if getattr(args, "record", None):
        if not getattr(args, "registry", None):
            raise _UsageError("--record requires --registry FILE")
        rec = registry.find_record(args.registry, args.record)
        return rec.codec, rec.payload
    if getattr(args, "payload_bits", None):
        payload = watermark.WatermarkPayload.from_bitstring(args.payload_bits)
    elif getattr(args, "payload", None):
        payload = watermark.WatermarkPayload.from_hex(args.payload)
    else:
        raise _UsageError("either --record ID, --payload HEX or --payload-bits is required")
    cfg = watermark.CodecConfig(
        method=args.method,
        key=_read_key(args),
        strength=args.strength,
        payload_length=len(payload),
        redundancy=args.redundancy,
    )
    return cfg, payload


def _pool_map(fn, items):
    if len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(_MAX_WORKERS, len(items))) as pool:
        return list(pool.map(fn, items))


def cmd_embed(args) -> int:
    paths = _list_images(args.in_dir)
    if not paths:
        print("no images found", file=sys.stderr)
        return EXIT_DATA
    cfg, payload = _codec_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = reports.RunReport(command=["embed"] + _echo(args))

    def one(path: Path) -> dict:
        img = load_image(path)
        marked, stats = watermark.embed(img, payload, cfg)
        out_path = out_dir / (path.stem + ".png")
        save_image(marked, out_path, format="png")
        return {
            "input": str(path),
            "input_sha256": reports.file_sha256(path),
            "output": str(out_path),
            "psnr_db": round(stats.psnr, 3),
            "blocks_used": stats.blocks_used,
        }

    report.results = _pool_map(one, paths)
    report.provenance = [f"method={cfg.method}", "evidence=measured"]
    report.write(args.report or out_dir / "embed_report.json")
    print(f"embedded {len(paths)} images -> {out_dir}")
    for r in report.results:
        print(f"  {Path(r['input']).name}: psnr {r['psnr_db']} dB")
    return EXIT_OK


def cmd_extract(args) -> int:
    paths = _list_images(args.in_dir)
    if not paths:
        print("no images found", file=sys.stderr)
        return EXIT_DATA
    cfg, payload = _codec_from_args(args)
    report = reports.RunReport(command=["extract"] + _echo(args))

    def one(path: Path) -> dict:
        img = load_image(path)
        res = watermark.extract(img, cfg)
        acc = watermark.bit_accuracy(res, payload)
        return {
            "input": str(path),
            "input_sha256": reports.file_sha256(path),
            "bits": "".join(str(b) for b in res.bits),
            "correct_bits": acc.correct_bits,
            "total_bits": acc.total_bits,
            "accuracy": round(acc.acc, 6),
        }

    report.results = _pool_map(one, paths)
    accs = [r["correct_bits"] for r in report.results]
    report.verdicts = {
        "avg_bits": float(np.mean(accs)),
        "best_bits": int(np.max(accs)),
        "n_bits": cfg.payload_length,
    }
    report.provenance = [f"method={cfg.method}", "evidence=measured"]
    report.write(args.out)
    print(
        f"extracted {len(paths)} images: avg {report.verdicts['avg_bits']:.2f} / "
        f"{cfg.payload_length} bits, best {report.verdicts['best_bits']}"
    )
    return EXIT_OK


def cmd_attack(args) -> int:
    paths = _list_images(args.in_dir)
    if not paths:
        print("no images found", file=sys.stderr)
        return EXIT_DATA
    spec = attacks.parse_attack_spec(args.spec, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = reports.RunReport(command=["attack"] + _echo(args), seeds={"attack": args.seed})

    def one(path: Path) -> dict:
        img = load_image(path)
        attacked = attacks.apply_attack(img, spec)
        out_path = out_dir / (path.stem + ".png")
        save_image(attacked.image, out_path, format="png")
        p = attacked.psnr_vs_source
        return {
            "input": str(path),
            "input_sha256": reports.file_sha256(path),
            "output": str(out_path),
            "psnr_vs_source_db": None if p == float("inf") else round(p, 3),
        }

    report.results = _pool_map(one, paths)
    report.provenance = [f"attack={spec.canonical()}"]
    report.write(args.report or out_dir / "attack_report.json")
    print(f"attacked {len(paths)} images with {spec.canonical()} -> {out_dir}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.degrade:
        return _simulate_degrade(args)
    if not args.preset:
        raise _UsageError("simulate needs --preset NAME (or --degrade DIR)")
    model = channel.preset(args.preset)
    if args.two_stage:
        model = channel.two_stage(model)
    label = model.label
    if args.mix is not None:
        if not args.clean:
            raise _UsageError("--mix requires --clean PRESET for the clean component")
        clean = channel.preset(args.clean)
        model = channel.mix(model, clean, args.mix)
        label = model.label
    samples = channel.sample_accuracies(model, args.n, seed=args.seed)
    doc = samples.to_dict()
    doc["label"] = label
    doc["provenance"] = model.provenance
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    s = verify.summary(samples)
    print(
        f"simulated {args.n} draws from {label}: avg {s['avg_bits']:.2f} bits, "
        f"best {s['best_bits']} (provenance: {model.provenance})"
    )
    return EXIT_OK


def _simulate_degrade(args) -> int:
    paths = _list_images(args.degrade)
    if not paths:
        print("no images found", file=sys.stderr)
        return EXIT_DATA
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = reports.RunReport(
        command=["simulate"] + _echo(args),
        seeds={"degrade": args.seed},
        provenance=[f"surrogate={args.severity}", "evidence=simulated"],
    )

    def one(item) -> dict:
        index, path = item
        img = load_image(path)
        degraded = channel.surrogate_degrade(img, args.severity, seed=args.seed + index)
        out_path = out_dir / (path.stem + ".png")
        save_image(degraded, out_path, format="png")
        return {
            "input": str(path),
            "input_sha256": reports.file_sha256(path),
            "output": str(out_path),
            "seed": args.seed + index,
        }

    report.results = _pool_map(one, list(enumerate(paths)))
    report.write(out_dir / "degrade_report.json")
    print(f"surrogate-degraded {len(paths)} images ({args.severity}) -> {out_dir}")
    return EXIT_OK


def _null_from_args(args, n_bits: int) -> verify.NullModel:
    if args.reference:
        doc = json.loads(Path(args.reference).read_text())
        ref = channel.AccuracySampleSet.from_dict(doc)
        return verify.NullModel.from_reference(ref)
    return verify.NullModel.chance(n_bits, p0=args.p0, rho=args.rho)


def cmd_verify(args) -> int:
    if args.samples:
        doc = json.loads(Path(args.samples).read_text())
        samples = channel.AccuracySampleSet.from_dict(doc)
        null = _null_from_args(args, samples.n_bits)
        verdict = verify.detect(samples, null, alpha=args.alpha)
        provenance = [doc.get("provenance", "unknown"), f"samples={args.samples}"]
    else:
        if not args.in_dir:
            raise _UsageError("verify needs --samples FILE or --in DIR")
        paths = _list_images(args.in_dir)
        if not paths:
            print("no images found", file=sys.stderr)
            return EXIT_DATA
        cfg, payload = _codec_from_args(args)
        images = [load_image(p) for p in paths]
        null = _null_from_args(args, cfg.payload_length)
        verdict = verify.extract_and_detect(images, cfg, payload, null=null, alpha=args.alpha)
        provenance = ["evidence=measured", f"method={cfg.method}"]

    vd = verdict.to_dict()
    vd["provenance"] = "; ".join(str(p) for p in provenance)
    if args.out:
        Path(args.out).write_text(json.dumps(vd, indent=1) + "\n")
    print(f"samples: {verdict.sample_count}, avg {verdict.avg_bits:.2f} bits, best {verdict.best_bits}")
    print(f"five-bin histogram: {list(verdict.histogram_5bin)}")
    print(f"p_mean {verdict.p_mean:.3e}  p_max {verdict.p_max:.3e}"
          + (f"  p_ks {verdict.p_ks:.3e}" if verdict.p_ks is not None else ""))
    print(f"decision: {verdict.decision} (alpha {verdict.alpha_used})")
    if verdict.decision == "theft-detected" and args.fail_on_theft:
        return EXIT_THEFT
    return EXIT_OK


def cmd_report(args) -> int:
    doc = json.loads(Path(args.run).read_text())
    binning = "five" if args.binning == "five" else "ten"
    if "samples" in doc:  # samples.json
        samples = channel.AccuracySampleSet.from_dict(doc)
        if args.format == "csv":
            out = reports.samples_to_csv(samples, binning=binning, label=doc.get("label", "samples"))
        else:
            out = json.dumps(reports.samples_to_plot_data(samples, binning=binning), indent=1)
    elif "histogram_5bin" in doc:  # verdict.json
        if args.format == "csv":
            out = reports.verdict_to_csv(doc, binning=binning)
        else:
            out = json.dumps(
                {
                    "bin_edges": list(
                        channel.FIVE_BIN_EDGES if binning == "five" else channel.TEN_BIN_EDGES
                    ),
                    "counts": doc["histogram_5bin"] if binning == "five" else doc["histogram_10bin"],
                    "avg_bits": doc["avg_bits"],
                    "best_bits": doc["best_bits"],
                    "decision": doc.get("decision"),
                },
                indent=1,
            )
    elif "results" in doc:  # run report
        rows = doc["results"]
        if args.format == "csv":
            import csv as _csv
            import io as _io

            buf = _io.StringIO()
            if rows:
                w = _csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
                w.writeheader()
                w.writerows(rows)
            out = buf.getvalue()
        else:
            out = json.dumps(rows, indent=1)
    else:
        print("unrecognized run file format", file=sys.stderr)
        return EXIT_DATA
    if args.out:
        Path(args.out).write_text(out)
    else:
        print(out, end="" if out.endswith("\n") else "\n")
    return EXIT_OK


def cmd_register(args) -> int:
    if args.payload:
        payload_hex = args.payload
        length = len(watermark.WatermarkPayload.from_hex(payload_hex))
    else:
        payload = watermark.WatermarkPayload.random(args.payload_length, seed=args.seed)
        payload_hex = payload.to_hex()
        length = args.payload_length
    key_ref = None
    key_hex = None
    if args.key:
        key_ref = str(Path(args.key).resolve())
        bytes.fromhex(Path(args.key).read_text().strip())  # validate early
    elif args.key_hex:
        if not args.insecure_inline_key:
            raise _UsageError("inline keys require --insecure-inline-key")
        key_hex = args.key_hex
    else:
        raise _UsageError("register needs --key FILE or --key-hex HEX")
    record = registry.RegistryRecord(
        artist_id=args.artist,
        role=args.role,
        payload_hex=payload_hex,
        method=args.method,
        payload_length=length,
        redundancy=args.redundancy,
        strength=args.strength,
        key_ref=key_ref,
        key_hex=key_hex,
        notes=args.notes,
        group_label=args.group,
    )
    record_id = registry.register(args.registry, record, allow_duplicate=args.allow_duplicate)
    print(record_id)
    return EXIT_OK


def cmd_lookup(args) -> int:
    for rec in registry.lookup(args.registry, args.artist):
        print(json.dumps(rec.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_presets(args) -> int:
    cat = channel.preset_catalog()
    for name in sorted(cat):
        e = cat[name]
        print(f"{name:26s} avg {e['avg_bits']:6.2f} best {e['best_bits']:2d}  [{e['source']}]")
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError:
        print("uvicorn is not installed; pip install mimicmark[serve]", file=sys.stderr)
        return EXIT_USAGE
    from .service.app import create_app

    uvicorn.run(create_app(registry_path=args.registry), host=args.host, port=args.port)
    return EXIT_OK


def _echo(args) -> list[str]:
    """Command echo for run reports; secrets are redacted, not reproduced."""
    skip = {"func"}
    redact = {"key_hex"}
    out = []
    for k, v in sorted(vars(args).items()):
        if k in skip or v is None:
            continue
        out.append(f"--{k}=<redacted>" if k in redact else f"--{k}={v}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mimicmark", description=__doc__)
    p.add_argument("--version", action="version", version=f"mimicmark {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_codec_flags(sp, with_payload=True):
        sp.add_argument("--record", help="registry record id supplying codec + payload")
        sp.add_argument("--registry", help="registry store path (JSON lines)")
        if with_payload:
            sp.add_argument("--payload", help="payload as hex (alternative to --record)")
            sp.add_argument("--payload-bits", help="payload as a 0/1 bit string")
        sp.add_argument("--method", default="dwt-dct-svd", choices=watermark.METHODS)
        sp.add_argument("--key", help="key file containing 32 hex chars")
        sp.add_argument("--key-hex", help="key as 32 hex chars (prefer --key)")
        sp.add_argument("--strength", type=float, default=None)
        sp.add_argument("--redundancy", type=int, default=watermark.DEFAULT_REDUNDANCY)

    sp = sub.add_parser("embed", help="batch-watermark a directory")
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--out", dest="out_dir", required=True)
    add_codec_flags(sp)
    sp.add_argument("--report", help="run-report path (default: OUT/embed_report.json)")
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("extract", help="batch extraction + accuracy against a record")
    sp.add_argument("--in", dest="in_dir", required=True)
    add_codec_flags(sp)
    sp.add_argument("--out", required=True, help="report JSON path")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("attack", help="apply an attack spec to a directory")
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--out", dest="out_dir", required=True)
    sp.add_argument("--spec", required=True, help='e.g. "jpeg:q=75", "rotation:deg=5"')
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("simulate", help="draw channel samples or surrogate-degrade a directory")
    sp.add_argument("--preset")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mix", type=float, default=None, help="watermarked proportion p")
    sp.add_argument("--clean", help="clean-component preset for --mix")
    sp.add_argument("--two-stage", action="store_true")
    sp.add_argument("--degrade", help="directory of images to surrogate-degrade")
    sp.add_argument("--severity", default="standard", choices=sorted(channel.SURROGATE_STACKS))
    sp.add_argument("--out", required=True, help="samples.json (or output dir with --degrade)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run the theft detector")
    sp.add_argument("--samples", help="samples.json produced by simulate")
    sp.add_argument("--in", dest="in_dir", help="directory of suspect images")
    add_codec_flags(sp)
    sp.add_argument("--null", choices=["chance"], default="chance")
    sp.add_argument("--reference", help="samples.json used as empirical-reference null")
    sp.add_argument("--alpha", type=float, default=verify.DEFAULT_ALPHA)
    sp.add_argument("--p0", type=float, default=0.5)
    sp.add_argument("--rho", type=float, default=verify.DEFAULT_RHO)
    sp.add_argument("--fail-on-theft", action="store_true")
    sp.add_argument("--out", help="verdict.json path")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="render a run/samples/verdict file to CSV or plot JSON")
    sp.add_argument("--run", required=True)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--binning", choices=["five", "ten"], default="five")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("register", help="add a watermark record to the registry")
    sp.add_argument("--registry", required=True)
    sp.add_argument("--artist", required=True)
    sp.add_argument("--role", choices=["authorized", "unauthorized"], default="unauthorized")
    sp.add_argument("--payload", help="payload hex; omit for a random payload")
    sp.add_argument("--payload-length", type=int, default=32,
                    choices=list(watermark.SUPPORTED_PAYLOAD_LENGTHS))
    sp.add_argument("--seed", type=int, default=None, help="seed for the random payload")
    sp.add_argument("--method", default="dwt-dct-svd", choices=watermark.METHODS)
    sp.add_argument("--key", help="key file (stored by reference)")
    sp.add_argument("--key-hex")
    sp.add_argument("--insecure-inline-key", action="store_true")
    sp.add_argument("--strength", type=float, default=None)
    sp.add_argument("--redundancy", type=int, default=watermark.DEFAULT_REDUNDANCY)
    sp.add_argument("--notes", default="")
    sp.add_argument("--group", default="", help="prompt group label")
    sp.add_argument("--allow-duplicate", action="store_true")
    sp.set_defaults(func=cmd_register)

    sp = sub.add_parser("lookup", help="list registry records for an artist")
    sp.add_argument("--registry", required=True)
    sp.add_argument("--artist", required=True)
    sp.set_defaults(func=cmd_lookup)

    sp = sub.add_parser("presets", help="list shipped channel presets")
    sp.set_defaults(func=cmd_presets)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--registry", default="registry.jsonl")
    sp.set_defaults(func=cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap to our usage code
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MimicmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
