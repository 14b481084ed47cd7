"""Command-line front end.

Commands: ``describe``, ``spectrum``, ``wavefunction``, ``matrix-element``,
``decoherence``, ``dump-matrices``.  Exit codes: 0 success, 2 input error,
3 numerical failure.  Settings may also come from ``CQE_``-prefixed
environment variables (``CQE_THREADS``, ``CQE_TEMP``), with explicit flags
taking precedence.
"""

from __future__ import annotations

import json
import math
import re
import sys

import click
import numpy as np

from .circuit import Circuit
from .errors import NetlistError, SolverError, ValidationError
from .netlist import parse_netlist_file, validate
from .noise import NoiseEnvironment
from .solver import sweep as run_sweep

_FLOAT_FMT = "%.17g"


def _parse_pi(token: str) -> float:
    """Floats with an optional pi factor: '0.5pi', '-pi', 'pi/2', '3pi/4'."""
    t = token.strip().replace(" ", "")
    m = re.fullmatch(r"([+-]?[\d.eE+-]*?)\s*pi(?:/([\d.]+))?", t)
    if m:
        lead = m.group(1)
        num = float(lead) if lead not in ("", "+", "-") else \
            (-1.0 if lead == "-" else 1.0)
        val = num * math.pi
        if m.group(2):
            val /= float(m.group(2))
        return val
    return float(t)


def _parse_range(txt: str) -> np.ndarray:
    parts = txt.split(":")
    if len(parts) == 1:
        return np.array([_parse_pi(parts[0])])
    if len(parts) != 3:
        raise click.UsageError(
            f"range must be 'start:stop:count' or a scalar, got '{txt}'")
    start, stop = _parse_pi(parts[0]), _parse_pi(parts[1])
    count = int(parts[2])
    if count < 1:
        raise click.UsageError("range count must be >= 1")
    return np.linspace(start, stop, count)


def _parse_sweep(txt: str):
    """'flux:l1=0:1:100' | 'ng:3=-1:1:51' | 'element:(0,1)#2=4:6:10'."""
    m = re.fullmatch(r"(flux|ng|element):(.+?)=(.+)", txt)
    if not m:
        raise click.UsageError(
            f"sweep must look like 'flux:<loop>=start:stop:count', got "
            f"'{txt}'")
    kind, target, rng = m.groups()
    values = _parse_range(rng)
    if kind == "flux":
        return ("flux", target), values
    if kind == "ng":
        return ("ng", int(target)), values
    em = re.fullmatch(r"\((\d+),(\d+)\)#(\d+)", target.strip())
    if not em:
        raise click.UsageError(
            f"element handle must be '(i,j)#index', got '{target}'")
    edge = (int(em.group(1)), int(em.group(2)))
    return ("element", (edge, int(em.group(3)))), values


def _load_circuit(netlist, trunc, fluxes, ngs, temp) -> Circuit:
    spec = parse_netlist_file(netlist)
    if temp is not None:
        spec.settings["temp"] = temp
    for item in fluxes:
        loop_id, _, val = item.partition("=")
        spec.set_flux(loop_id, float(val))
    circuit = Circuit(spec)
    for item in ngs:
        mode, _, val = item.partition("=")
        circuit.set_charge_offset(int(mode), float(val))
    if trunc:
        circuit.set_trunc_nums([int(t) for t in trunc.split(",")])
    return circuit


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + ",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")


def _common_options(fn):
    fn = click.option("--trunc", help="comma-separated truncation numbers, "
                      "one per mode")(fn)
    fn = click.option("--flux", "fluxes", multiple=True,
                      help="loop flux override, 'loopid=value' in Phi0 "
                      "units")(fn)
    fn = click.option("--ng", "ngs", multiple=True,
                      help="charge offset, 'mode=value'")(fn)
    fn = click.option("--temp", type=float, envvar="CQE_TEMP",
                      help="bath temperature, K")(fn)
    return fn


@click.group()
def cli():
    """Quantized analysis of superconducting circuits from a netlist."""


@cli.command()
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False))
@_common_options
def describe(netlist, trunc, fluxes, ngs, temp):
    """Summarize the transformed circuit: modes, charging energies,
    junction prefactors, and flux factors."""
    circuit = _load_circuit(netlist, trunc, fluxes, ngs, temp)
    click.echo(circuit.description())


@cli.command()
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False))
@_common_options
@click.option("--n-eig", default=5, show_default=True,
              help="number of eigenfrequencies")
@click.option("--sweep", "sweep_spec",
              help="'flux:<loop>=a:b:n' | 'ng:<mode>=a:b:n' | "
              "'element:(i,j)#k=a:b:n'")
@click.option("-o", "--output", default="spectrum.csv", show_default=True)
@click.option("--fmt", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.option("--threads", default=1, show_default=True, envvar="CQE_THREADS")
@click.option("--plot-script", is_flag=True,
              help="also emit a gnuplot script next to the CSV")
def spectrum(netlist, trunc, fluxes, ngs, temp, n_eig, sweep_spec, output,
             fmt, threads, plot_script):
    """Eigenfrequencies (GHz), optionally swept over a parameter."""
    circuit = _load_circuit(netlist, trunc, fluxes, ngs, temp)
    if sweep_spec:
        handle, values = _parse_sweep(sweep_spec)
    else:
        handle, values = None, np.array([0.0])

    if handle is None:
        freqs = circuit.diag(n_eig).efreqs.reshape(-1, 1)
        values = np.array([0.0])
    else:
        try:
            freqs = run_sweep(circuit, handle, values, n_eig,
                              threads=threads)
        except SolverError as exc:
            _flush_partial(exc, values, output)
            raise

    header = ["value"] + [f"e{k}_GHz" for k in range(n_eig)]
    rows = [[values[j], *(freqs[:, j] / 1e9)] for j in range(len(values))]
    if fmt == "json":
        payload = {
            "values": list(map(float, values)),
            "efreqs_ghz": [[float(x) for x in freqs[:, j] / 1e9]
                           for j in range(len(values))],
            "n_eig": n_eig,
        }
        with open(output, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
    else:
        _write_csv(output, header, rows)
    if plot_script:
        _emit_plot_script(output, n_eig)
    click.echo(f"wrote {output}")


def _flush_partial(exc: SolverError, values, output):
    partial = getattr(exc, "partial", None) or {}
    if partial:
        n_eig = len(next(iter(partial.values())))
        done = sorted(partial)
        rows = [[values[j], *(np.asarray(partial[j]) / 1e9)] for j in done]
        _write_csv(output + ".partial", ["value"] +
                   [f"e{k}_GHz" for k in range(n_eig)], rows)
    manifest = {
        "failed_index": exc.sweep_index,
        "completed": sorted(int(j) for j in partial),
        "error": str(exc),
    }
    with open(output + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _emit_plot_script(csv_path, n_eig):
    script = csv_path.rsplit(".", 1)[0] + ".gp"
    with open(script, "w", encoding="utf-8") as fh:
        fh.write("set datafile separator ','\n"
                 "set xlabel 'parameter'\n"
                 "set ylabel 'frequency (GHz)'\n"
                 f"plot for [i=2:{n_eig + 1}] '{csv_path}' "
                 "using 1:i with lines title sprintf('e%d', i-2)\n")


@cli.command()
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False))
@_common_options
@click.option("--state", default=0, show_default=True,
              help="eigenstate index")
@click.option("--grid", "grid_spec", required=True,
              help="per-mode phase grids, comma-separated scalars or "
              "'start:stop:count' ranges ('pi' literals allowed)")
@click.option("-o", "--output", default="wavefunction", show_default=True)
@click.option("--fmt", type=click.Choice(["csv", "bin"]), default="csv",
              show_default=True)
def wavefunction(netlist, trunc, fluxes, ngs, temp, state, grid_spec, output,
                 fmt):
    """Eigenfunction on a phase grid: |psi|^2 plus real/imag parts."""
    circuit = _load_circuit(netlist, trunc, fluxes, ngs, temp)
    grids = [_parse_range(part) for part in grid_spec.split(",")]
    if len(grids) != circuit.n_modes:
        raise click.UsageError(
            f"grid has {len(grids)} entries but the circuit has "
            f"{circuit.n_modes} modes")
    psi = circuit.eig_phase_coord(state, grids)

    axes = [g for g in grids if g.size > 1]
    if fmt == "bin":
        base = output.rsplit(".", 1)[0]
        psi.astype(np.complex128).tofile(base + ".bin")
        header = {
            "dtype": "complex128",
            "shape": list(psi.shape),
            "axes": [[float(x) for x in g] for g in axes],
            "order": "C",
        }
        with open(base + ".json", "w", encoding="utf-8") as fh:
            json.dump(header, fh, sort_keys=True, indent=1)
            fh.write("\n")
        click.echo(f"wrote {base}.bin, {base}.json")
        return

    out = output if output.endswith(".csv") else output + ".csv"
    mesh = np.meshgrid(*axes, indexing="ij") if axes else []
    flat = psi.reshape(-1)
    cols = [m.reshape(-1) for m in mesh]
    header = [f"phi{k}" for k in range(1, len(cols) + 1)] + \
        ["abs2", "re", "im"]
    rows = np.column_stack(cols + [np.abs(flat) ** 2, flat.real, flat.imag])
    _write_csv(out, header, rows)
    click.echo(f"wrote {out}")


@cli.command("matrix-element")
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False))
@_common_options
@click.option("--type", "kind",
              type=click.Choice(["capacitive", "inductive"]), required=True)
@click.option("--nodes", required=True, help="'i,j'")
@click.option("--states", default="0,1", show_default=True)
def matrix_element_cmd(netlist, trunc, fluxes, ngs, temp, kind, nodes,
                       states):
    """Transition matrix element of a coupling operator."""
    circuit = _load_circuit(netlist, trunc, fluxes, ngs, temp)
    i, j = (int(x) for x in nodes.split(","))
    m, n = (int(x) for x in states.split(","))
    val = circuit.matrix_element(kind, (i, j), (m, n))
    click.echo(json.dumps({
        "type": kind, "nodes": [i, j], "states": [m, n],
        "re": val.real, "im": val.imag, "abs": abs(val),
    }, sort_keys=True))


@cli.command()
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False))
@_common_options
@click.option("--channel", required=True,
              type=click.Choice(["capacitive", "inductive", "quasiparticle",
                                 "cc", "charge", "flux"]))
@click.option("--states", default="1,0", show_default=True)
@click.option("--total/--downward", default=True,
              help="sum both transition directions (depolarization only)")
@click.option("--balance-check", is_flag=True,
              help="also print the up/down rate ratio next to the Boltzmann "
              "factor")
@click.option("--sweep", "sweep_spec",
              help="sweep a flux: 'flux:<loop>=a:b:n'; writes CSV of rate "
              "and time per point")
@click.option("-o", "--output", default="decoherence.csv", show_default=True)
def decoherence(netlist, trunc, fluxes, ngs, temp, channel, states, total,
                balance_check, sweep_spec, output):
    """Depolarization or 1/f dephasing rates; JSON to stdout, CSV for
    sweeps."""
    circuit = _load_circuit(netlist, trunc, fluxes, ngs, temp)
    m, n = (int(x) for x in states.split(","))
    env = circuit.noise_environment()

    if sweep_spec:
        handle, values = _parse_sweep(sweep_spec)
        if handle[0] != "flux":
            raise click.UsageError("decoherence sweeps support flux only")
        rows = []
        for j, v in enumerate(values):
            circuit.set_flux(handle[1], v)
            circuit.diag(max(m, n) + 3)
            try:
                res = circuit.dec_rate(channel, (m, n), total=total, env=env)
            except SolverError as exc:
                exc.sweep_index = j
                raise
            rate = res.rate
            rows.append([v, rate, (1.0 / rate) if rate > 0 else math.inf])
        _write_csv(output, ["value", "rate_1_per_s", "time_s"], rows)
        click.echo(f"wrote {output}")
        return

    circuit.diag(max(m, n) + 3)
    res = circuit.dec_rate(channel, (m, n), total=total, env=env)
    payload = {
        "channel": channel,
        "states": [m, n],
        "direction": res.direction,
        "rate_1_per_s": res.rate,
        "time_s": (1.0 / res.rate) if res.rate > 0 else None,
        "breakdown": [{"element": k, "rate_1_per_s": v}
                      for k, v in res.breakdown],
    }
    if balance_check and channel in ("capacitive", "inductive",
                                     "quasiparticle"):
        from .constants import HBAR, K_BOLTZMANN
        down = circuit.dec_rate(channel, (m, n), total=False, env=env)
        up_total = circuit.dec_rate(channel, (m, n), total=True, env=env)
        up = up_total.rate - down.rate
        fr = circuit.spectrum.efreqs
        w = 2 * math.pi * abs(fr[m] - fr[n])
        payload["balance"] = {
            "up_over_down": up / down.rate if down.rate else None,
            "boltzmann": math.exp(-HBAR * w /
                                  (K_BOLTZMANN * env.temperature)),
        }
    click.echo(json.dumps(payload, sort_keys=True, indent=1))


@cli.command("dump-matrices")
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False))
@_common_options
@click.option("-o", "--outdir", default=".", show_default=True,
              type=click.Path(file_okay=False))
def dump_matrices(netlist, trunc, fluxes, ngs, temp, outdir):
    """Write C, L*, W, B, G, C_ed as CSV files for debugging."""
    import os
    circuit = _load_circuit(netlist, trunc, fluxes, ngs, temp)
    os.makedirs(outdir, exist_ok=True)
    mats = {
        "C": circuit.matrices.C,
        "Lstar": circuit.matrices.Lstar,
        "W": circuit.matrices.W,
        "B": circuit.matrices.B,
        "G": circuit.matrices.G,
        "C_ed": circuit.matrices.C_ed,
    }
    for name, mat in mats.items():
        path = os.path.join(outdir, f"{name}.csv")
        np.savetxt(path, np.atleast_2d(mat), fmt=_FLOAT_FMT, delimiter=",")
    click.echo(f"wrote {', '.join(sorted(mats))} to {outdir}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except (NetlistError, ValidationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except SolverError as exc:
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(3)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
