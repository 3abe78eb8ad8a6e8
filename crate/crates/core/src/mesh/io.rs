use super::{Mesh, MeshError, Point};
use std::fmt::Write as _;
use std::path::Path;

/// Canonical text form. Coordinates use the shortest representation that
/// parses back to the same double.
pub fn write_mesh(mesh: &Mesh) -> String {
    let dim = mesh.dim();
    let mut s = String::new();
    writeln!(s, "mesh {} {} {} {}", dim, mesh.n_nodes(), mesh.n_cells(), mesh.n_facets()).unwrap();
    for p in mesh.nodes() {
        s.push('v');
        for x in &p[..dim] {
            write!(s, " {x:?}").unwrap();
        }
        s.push('\n');
    }
    for c in 0..mesh.n_cells() {
        s.push('c');
        for i in mesh.cell(c) {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    for f in 0..mesh.n_facets() {
        write!(s, "b {}", mesh.facet_tag(f)).unwrap();
        for i in mesh.facet(f) {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh(mesh))?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

fn malformed(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::MalformedMeshFile { line, message: message.into() }
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| malformed(1, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "mesh" {
        return Err(malformed(hline, "expected `mesh <dim> <n_nodes> <n_cells> <n_bfacets>`"));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| malformed(hline, format!("bad {what} {s:?}")));
    let dim = num(h[1], "dimension")?;
    if dim != 2 && dim != 3 {
        return Err(malformed(hline, format!("dimension must be 2 or 3, got {dim}")));
    }
    let (nn, nc, nf) = (num(h[2], "node count")?, num(h[3], "cell count")?, num(h[4], "facet count")?);
    let mut nodes: Vec<Point> = Vec::with_capacity(nn);
    let mut cells = Vec::with_capacity(nc);
    let mut facets = Vec::with_capacity(nf);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let index = |k: usize, s: &str| -> Result<usize, MeshError> {
            let i = s.parse::<usize>().map_err(|_| malformed(ln, format!("field {k}: bad index {s:?}")))?;
            if i >= nn {
                return Err(malformed(ln, format!("field {k}: node index {i} out of range (n_nodes = {nn})")));
            }
            Ok(i)
        };
        match f[0] {
            "v" => {
                if f.len() != dim + 1 {
                    return Err(malformed(ln, format!("vertex needs {dim} coordinates")));
                }
                if nodes.len() == nn {
                    return Err(malformed(ln, "more vertices than declared"));
                }
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = f[a + 1].parse::<f64>().map_err(|_| malformed(ln, format!("field {}: bad coordinate {:?}", a + 1, f[a + 1])))?;
                    if !p[a].is_finite() {
                        return Err(malformed(ln, format!("field {}: non-finite coordinate", a + 1)));
                    }
                }
                nodes.push(p);
            }
            "c" => {
                if f.len() != dim + 2 {
                    return Err(malformed(ln, format!("cell needs {} indices", dim + 1)));
                }
                if cells.len() == nc {
                    return Err(malformed(ln, "more cells than declared"));
                }
                let c = (1..f.len()).map(|k| index(k, f[k])).collect::<Result<Vec<_>, _>>()?;
                cells.push(c);
            }
            "b" => {
                if f.len() != dim + 2 {
                    return Err(malformed(ln, format!("boundary facet needs a tag and {dim} indices")));
                }
                if facets.len() == nf {
                    return Err(malformed(ln, "more boundary facets than declared"));
                }
                let b = (2..f.len()).map(|k| index(k, f[k])).collect::<Result<Vec<_>, _>>()?;
                facets.push((b, f[1].to_string()));
            }
            other => return Err(malformed(ln, format!("unknown record {other:?}"))),
        }
    }
    if nodes.len() != nn || cells.len() != nc || facets.len() != nf {
        return Err(malformed(
            hline,
            format!("header declares {nn}/{nc}/{nf} records, found {}/{}/{}", nodes.len(), cells.len(), facets.len()),
        ));
    }
    Mesh::new(dim, nodes, cells, facets).map_err(|e| malformed(0, e.to_string()))
}
