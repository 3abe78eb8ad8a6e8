use super::solver::EquilibriumSolution;
use super::FemError;
use std::fmt::Write as _;

/// Text form of a solution: a `solution <n_dofs>` header, the mesh checksum,
/// the solver status and one dof value per line.
pub fn write_solution(sol: &EquilibriumSolution, mesh_checksum: &str) -> String {
    let mut s = String::new();
    writeln!(s, "solution {}", sol.dofs.len()).unwrap();
    writeln!(s, "mesh {mesh_checksum}").unwrap();
    writeln!(s, "load {:?}", sol.load_scale).unwrap();
    writeln!(s, "converged {} {} {:?}", sol.converged, sol.newton_iters, sol.residual_norm).unwrap();
    for v in &sol.dofs {
        writeln!(s, "{v:?}").unwrap();
    }
    s
}

fn bad(line: usize, message: impl Into<String>) -> FemError {
    FemError::MalformedSolutionFile { line, message: message.into() }
}

/// Parses a solution file and returns it with the recorded mesh checksum.
pub fn read_solution(text: &str) -> Result<(EquilibriumSolution, String), FemError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut field = |key: &str| -> Result<(usize, Vec<String>), FemError> {
        let (ln, l) = lines.next().ok_or_else(|| bad(0, format!("missing `{key}` line")))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(ln, format!("expected `{key}`")));
        }
        Ok((ln, it.map(str::to_string).collect()))
    };
    let (ln, h) = field("solution")?;
    let n: usize = h.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad dof count"))?;
    let (ln, m) = field("mesh")?;
    let checksum = m.first().cloned().ok_or_else(|| bad(ln, "missing checksum"))?;
    let (ln, l) = field("load")?;
    let load_scale: f64 = l.first().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "bad load"))?;
    let (ln, c) = field("converged")?;
    if c.len() != 3 {
        return Err(bad(ln, "expected `converged <bool> <iters> <residual>`"));
    }
    let converged: bool = c[0].parse().map_err(|_| bad(ln, "bad flag"))?;
    let newton_iters: usize = c[1].parse().map_err(|_| bad(ln, "bad iteration count"))?;
    let residual_norm: f64 = c[2].parse().map_err(|_| bad(ln, "bad residual"))?;
    let mut dofs = Vec::with_capacity(n);
    for (ln, l) in lines {
        if l.is_empty() {
            continue;
        }
        dofs.push(l.parse::<f64>().map_err(|_| bad(ln, format!("bad value {l:?}")))?);
    }
    if dofs.len() != n {
        return Err(bad(1, format!("header declares {n} values, found {}", dofs.len())));
    }
    Ok((
        EquilibriumSolution {
            dofs,
            load_scale,
            converged,
            newton_iters,
            residual_norm,
            residual_history: Vec::new(),
            failure: None,
        },
        checksum,
    ))
}
