//! Matplotlib scripts written next to the run outputs.

const HEADER: &str = "#!/usr/bin/env python3\n# Generated by coagscale. Run from the output directory.\nimport csv\nimport json\nimport sys\nfrom collections import defaultdict\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n\ndef read_rows(path):\n    with open(path, newline=\"\") as fh:\n        return list(csv.DictReader(fh))\n\n";

pub fn profile_script() -> String {
    let body = r#"rows = read_rows("profile.csv")
series = defaultdict(list)
for r in rows:
    series[int(r["n"])].append((float(r["xi"]), float(r["phi2"])))

fig, ax = plt.subplots(figsize=(6, 4))
for n, pts in sorted(series.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], label=f"n = {n}")
ax.set_xlabel("xi")
ax.set_ylabel("Phi_2,n(xi)")
ax.set_yscale("log")
ax.legend()
fig.tight_layout()
fig.savefig("profile.png", dpi=150)
"#;
    format!("{HEADER}{body}")
}

pub fn converge_script() -> String {
    let body = r#"rows = read_rows("converge.csv")
series = defaultdict(list)
for r in rows:
    series[float(r["xi"])].append((int(r["j"]), float(r["abs_err"])))

fig, ax = plt.subplots(figsize=(6, 4))
for xi, pts in sorted(series.items()):
    pts.sort()
    ax.loglog([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], "o-", label=f"xi = {xi:g}")
fits = json.load(open("converge_fits.json"))
title = ", ".join(
    f"{f['xi']:g}: {f['fit']['exponent']:.3f}" for f in fits["fits"] if f.get("fit")
)
ax.set_title("fitted exponents " + title, fontsize=8)
ax.set_xlabel("j")
ax.set_ylabel("|F - Phi_2,n(xi)|")
ax.legend()
fig.tight_layout()
fig.savefig("converge.png", dpi=150)

traj = read_rows("trajectory.csv")
fig, ax = plt.subplots(figsize=(6, 4))
ax.loglog([float(r["tau"]) for r in traj], [float(r["x"]) for r in traj], label="x = c1")
ax.set_xlabel("tau")
ax.legend()
fig.tight_layout()
fig.savefig("trajectory.png", dpi=150)
"#;
    format!("{HEADER}{body}")
}

pub fn diagnostics_script() -> String {
    let body = r#"rows = read_rows("diagnostics_rates.csv")
series = defaultdict(list)
for r in rows:
    series[(r["quantity"], float(r["xi"]))].append((float(r["tau"]), abs(float(r["value"]))))

quantities = sorted({q for q, _ in series})
fig, axes = plt.subplots(len(quantities), 1, figsize=(6, 3 * len(quantities)), squeeze=False)
for ax, q in zip(axes[:, 0], quantities):
    for (name, xi), pts in sorted(series.items()):
        if name != q:
            continue
        pts.sort()
        ax.loglog([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], "o-", label=f"xi = {xi:g}")
    ax.set_title(q, fontsize=8)
    ax.set_xlabel("tau")
    ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig("diagnostics.png", dpi=150)
"#;
    format!("{HEADER}{body}")
}
