"""Command-line entry point.

Subcommands: features, fit, analyze, decode, stream. Flag names and defaults
are a compatibility surface; scripts and the browser client's dev loop rely
on them. Console output rounds to 4 significant digits, files keep full
precision, and every file is written atomically (temp file + rename).

A JSON config file may pre-set any long option (keys use underscores, e.g.
{"half_life": 0.5}); explicit flags always win over the config file.
"""

from __future__ import annotations

import json
import os
import sys

import click
from click.core import ParameterSource

from . import audio_io, decoder, dsp, midlevel, regression
from .fileio import atomic_write_text


def _sig4(value: float) -> str:
    return f"{value:#.4g}"


def _apply_config(ctx: click.Context, config_path) -> None:
    """Fill parameters still at their defaults from the config file."""
    if not config_path:
        return
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"config {config_path}: {exc}")
    if not isinstance(cfg, dict):
        raise click.ClickException(f"config {config_path}: expected an object")
    for key, value in cfg.items():
        if key in ctx.params and ctx.get_parameter_source(key) == ParameterSource.DEFAULT:
            ctx.params[key] = value


def _load_audio(path) -> audio_io.AudioBuffer:
    try:
        return audio_io.to_canonical(audio_io.load_wav(path))
    except (audio_io.WavFormatError, OSError) as exc:
        raise click.ClickException(str(exc))


def _load_model(path) -> regression.EmotionModel:
    try:
        return regression.load_model(path)
    except regression.ModelFormatError as exc:
        raise click.ClickException(str(exc))


def _provider(spec_text: str) -> midlevel.MidLevelProvider:
    try:
        return midlevel.parse_provider_spec(spec_text)
    except (ValueError, OSError) as exc:
        raise click.ClickException(f"provider {spec_text!r}: {exc}")


def _subset(flag: str):
    if flag in regression.FEATURE_SUBSETS:
        return regression.FEATURE_SUBSETS[flag]
    names = [part.strip() for part in flag.split(",") if part.strip()]
    try:
        return regression.resolve_feature_subset(names)
    except ValueError as exc:
        raise click.ClickException(str(exc))


def _subset_label(flag: str, p: int) -> str:
    return regression.SUBSET_LABELS.get(flag, f"Custom set ({p} features)")


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None,
    help="JSON file of option defaults; explicit flags win.",
)


@click.group()
@click.version_option(package_name="emostream")
def main() -> None:
    """Decode perceived emotion (valence/arousal) from music audio."""


@main.command()
@click.argument("audio", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=".",
              help="Directory for the feature CSV files.")
@click.option("--window", type=float, default=5.0, show_default=True,
              help="Analysis window length in seconds.")
@click.option("--hop", type=float, default=1.0, show_default=True,
              help="Hop between windows in seconds.")
@config_option
@click.pass_context
def features(ctx, audio, out_dir, window, hop, config) -> None:
    """Extract the RMS trace, onset list, and per-window summary features."""
    _apply_config(ctx, config)
    window, hop = ctx.params["window"], ctx.params["hop"]
    buf = _load_audio(audio)
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(audio))[0]

    trace = dsp.rms_trace(buf, dsp.default_rms_spec())
    onsets = dsp.detect_onsets(buf)
    dsp.write_rms_csv(trace, os.path.join(out_dir, f"{stem}.rms.csv"))
    dsp.write_onsets_csv(onsets, os.path.join(out_dir, f"{stem}.onsets.csv"))

    try:
        spec = decoder.WindowSpec(window, hop)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    lines = ["t_start,t_end,onset_density,mean_rms"]
    rate = buf.sample_rate
    window_n, hop_n = round(spec.window_length * rate), round(spec.hop_length * rate)
    end = window_n
    while end <= len(buf.samples):
        t0, t1 = (end - window_n) / rate, end / rate
        density = dsp.onset_density(onsets, t0, t1)
        rms = dsp.mean_rms(trace, t0, t1)
        lines.append(f"{repr(t0)},{repr(t1)},{repr(density)},{repr(rms)}")
        end += hop_n
    atomic_write_text(os.path.join(out_dir, f"{stem}.windows.csv"), "\n".join(lines) + "\n")

    click.echo(f"{stem}: {len(trace.values)} rms frames, {len(onsets.onset_times)} onsets, "
               f"{max(len(lines) - 1, 0)} windows")


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", default="all", show_default=True,
              help="Feature subset: all, midlevel7, new2, or a comma-separated list.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Where to write the fitted model file.")
@config_option
@click.pass_context
def fit(ctx, dataset, subset, out_path, config) -> None:
    """Fit the linear emotion model and print an adjusted R^2 table."""
    _apply_config(ctx, config)
    subset = ctx.params["subset"]
    try:
        ds = regression.load_dataset(dataset)
        model = regression.fit_emotion_model(ds, _subset(subset))
    except (regression.DatasetFormatError, ValueError) as exc:
        raise click.ClickException(str(exc))
    regression.save_model(model, out_path)

    label = _subset_label(subset, len(model.feature_indices))
    click.echo(f"{'':40s} {'Arousal':>8s} {'Valence':>8s}")
    click.echo(f"{label:40s} {_sig4(model.arousal_fit.adjusted_r2):>8s} "
               f"{_sig4(model.valence_fit.adjusted_r2):>8s}")
    click.echo(f"model written to {out_path} (n={model.arousal_fit.n}, "
               f"p={model.arousal_fit.p})")


@main.command()
@click.argument("model_path", metavar="MODEL", type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Write the T-value table as CSV.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False), default=None,
              help="Write the T-value bar chart as SVG.")
def analyze(model_path, csv_path, svg_path) -> None:
    """Rank features by T-value for a fitted model."""
    model = _load_model(model_path)
    report = regression.importance_report(model)
    for target in ("arousal", "valence"):
        click.echo(f"{target}:")
        for name, t in report[target]:
            click.echo(f"  {name:20s} {_sig4(t):>10s}")
    if csv_path:
        regression.write_importance_csv(report, csv_path)
    if svg_path:
        regression.write_importance_svg(report, svg_path)


@main.command()
@click.argument("audio", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Fitted model file.")
@click.option("--provider", default="constant:0.5,0.5,0.5,0.5,0.5,0.5,0.5",
              show_default=True,
              help="Mid-level source: constant:v1,...,v7 or trace:PATH.")
@click.option("--dynamic", "mode_dynamic", is_flag=True, help="Windowed trace (default).")
@click.option("--static", "mode_static", is_flag=True, help="Single whole-clip point.")
@click.option("--window", type=float, default=5.0, show_default=True)
@click.option("--hop", type=float, default=1.0, show_default=True)
@click.option("--smooth", "do_smooth", is_flag=True,
              help="Export the render-rate smoothed trace instead of raw points.")
@click.option("--half-life", type=float, default=0.35, show_default=True)
@click.option("--render-rate", type=float, default=30.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Trace file; .csv for CSV, anything else for JSON lines.")
@config_option
@click.pass_context
def decode(ctx, audio, model_path, provider, mode_dynamic, mode_static,
           window, hop, do_smooth, half_life, render_rate, out_path, config) -> None:
    """Decode an audio file to an emotion trace (dynamic) or point (static)."""
    _apply_config(ctx, config)
    p = ctx.params
    window, hop = p["window"], p["hop"]
    half_life, render_rate = p["half_life"], p["render_rate"]
    if mode_dynamic and mode_static:
        raise click.UsageError("--dynamic and --static are mutually exclusive")

    buf = _load_audio(audio)
    model = _load_model(model_path)
    prov = _provider(p["provider"])

    if mode_static:
        try:
            point = decoder.static_decode(buf, model, prov)
        except ValueError as exc:
            raise click.ClickException(str(exc))
        trace = decoder.EmotionTrace(points=(point,), source_id=audio)
    else:
        try:
            spec = decoder.WindowSpec(window, hop)
        except ValueError as exc:
            raise click.UsageError(str(exc))
        trace = decoder.dynamic_decode(buf, model, prov, spec, source_id=audio)

    if do_smooth:
        if len(trace) == 0:
            raise click.ClickException("audio shorter than one window; nothing to smooth")
        trace = decoder.smooth(trace, decoder.SmoothingSpec(render_rate, half_life))

    text = decoder.trace_to_csv(trace) if str(out_path).endswith(".csv") \
        else decoder.trace_to_jsonl(trace)
    atomic_write_text(out_path, text)
    if len(trace) == 0:
        click.echo(f"0 points (audio shorter than one window) -> {out_path}")
    else:
        last = trace.points[-1]
        click.echo(f"{len(trace)} points -> {out_path} "
                   f"(last: t={_sig4(last.t)} v={_sig4(last.valence)} "
                   f"a={_sig4(last.arousal)} {decoder.nearest_emotion_word(last)})")


@main.command()
@click.option("--audio", "audio_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Decode this file live.")
@click.option("--replay", "replay_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Replay a recorded trace file.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Model file (required with --audio).")
@click.option("--provider", default="constant:0.5,0.5,0.5,0.5,0.5,0.5,0.5",
              show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--speed", type=float, default=1.0, show_default=True,
              help="Replay speed multiplier.")
@click.option("--smooth", "do_smooth", is_flag=True,
              help="Replay the smoothed trace (replay mode only).")
@click.option("--half-life", type=float, default=0.35, show_default=True)
@click.option("--render-rate", type=float, default=30.0, show_default=True)
@click.option("--no-realtime", is_flag=True,
              help="Decode flat out instead of pacing at the sample clock.")
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, exists=True),
              default=None, help="Serve this directory of static files at /.")
@config_option
@click.pass_context
def stream(ctx, audio_path, replay_path, model_path, provider, port, speed,
           do_smooth, half_life, render_rate, no_realtime, ui_dir, config) -> None:
    """Serve a live decode or trace replay over the /stream WebSocket."""
    _apply_config(ctx, config)
    p = ctx.params
    port, speed = p["port"], p["speed"]
    from . import stream_server

    if (audio_path is None) == (replay_path is None):
        raise click.UsageError("exactly one of --audio or --replay is required")

    model = None
    if replay_path is not None:
        try:
            trace = decoder.load_trace(replay_path)
        except (OSError, ValueError, KeyError) as exc:
            raise click.ClickException(f"{replay_path}: {exc}")
        if do_smooth and not trace.smoothed:
            trace = decoder.smooth(
                trace, decoder.SmoothingSpec(p["render_rate"], p["half_life"])
            )
        source = stream_server.TraceReplaySource(trace, speed=speed)
    else:
        if model_path is None:
            raise click.UsageError("--model is required with --audio")
        buf = _load_audio(audio_path)
        model = _load_model(model_path)
        source = stream_server.LiveDecodeSource(
            buf, model, _provider(p["provider"]),
            realtime=not no_realtime, source_id=audio_path,
        )

    app = stream_server.create_app(source=source, model=model, ui_dir=ui_dir)
    import uvicorn

    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        if isinstance(exc, SystemExit) and not exc.code:
            return
        raise click.ClickException(f"server failed on port {port}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
