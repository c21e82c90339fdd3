//! Binary checkpoints.
//!
//! Layout: the magic line `MHDSHELL-CHECKPOINT`, one line of JSON metadata,
//! then the payload. The payload is every field of [`FIELD_ORDER`] (then one
//! `trace_<j>` per shell substep) as consecutive row-major 64-bit floats in
//! the byte order named by the header's `endianness` key.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::Cumulative;
use crate::fluid::FluidState;
use crate::geometry::Grid;
use crate::shell::ShellState;
use crate::splitting::{Simulation, TimeShiftBuffer};
use crate::{Error, Result};

pub const MAGIC: &str = "MHDSHELL-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

/// Payload order before the per-substep traces.
pub const FIELD_ORDER: [&str; 9] = ["scalars", "rho", "b", "mx", "my", "q_th", "w", "v", "theta"];

/// Scalars stored bit-exactly in the payload, in this order.
pub const SCALARS: [&str; 8] = [
    "fluid_time",
    "shell_time",
    "rho_ref",
    "shell_dissipation",
    "entropy_production",
    "exterior_dissipation",
    "sink",
    "mismatch",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderMeta {
    pub dt: f64,
    pub delta: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub endianness: String,
    pub nx: usize,
    pub box_halfwidth: f64,
    pub n_nodes: usize,
    pub substeps: usize,
    pub window: usize,
    /// Informational; the exact value is in the `scalars` field.
    pub time: f64,
    pub ladder: LadderMeta,
    pub fields: Vec<FieldMeta>,
}

/// Everything needed to resume a run bit-compatibly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fluid: FluidState,
    pub shell: ShellState,
    pub buffer: TimeShiftBuffer,
    pub cumulative: Cumulative,
    pub window: usize,
    pub rho_ref: f64,
    pub ladder: LadderMeta,
}

impl Checkpoint {
    pub fn from_simulation(sim: &Simulation) -> Self {
        Self {
            fluid: sim.fluid.clone(),
            shell: sim.shell.clone(),
            buffer: sim.buffer.clone(),
            cumulative: sim.cumulative,
            window: sim.window,
            rho_ref: sim.eos().rho_ref,
            ladder: LadderMeta {
                dt: sim.ladder.dt,
                delta: sim.ladder.delta,
                xi: sim.ladder.xi,
            },
        }
    }

    /// Rebuilds the simulation; the ladder must match `config`.
    pub fn resume(self, config: &RunConfig) -> Result<Simulation> {
        let s = &config.splitting;
        if (s.dt, s.delta, s.xi) != (self.ladder.dt, self.ladder.delta, self.ladder.xi) {
            return Err(Error::Checkpoint(format!(
                "ladder (dt, delta, xi) = ({}, {}, {}) differs from the configuration",
                self.ladder.dt, self.ladder.delta, self.ladder.xi
            )));
        }
        let mut eos = config.eos;
        eos.rho_ref = self.rho_ref;
        Simulation::from_parts(
            config,
            eos,
            self.fluid,
            self.shell,
            self.buffer,
            self.cumulative,
            self.window,
        )
    }

    fn scalars(&self) -> Vec<f64> {
        let c = &self.cumulative;
        vec![
            self.fluid.t,
            self.shell.t,
            self.rho_ref,
            c.shell_dissipation,
            c.entropy_production,
            c.exterior_dissipation,
            c.sink,
            c.mismatch,
        ]
    }

    fn payload(&self) -> Vec<(String, Vec<f64>)> {
        let f = &self.fluid;
        let s = &self.shell;
        let mut out = vec![
            ("scalars".to_string(), self.scalars()),
            ("rho".into(), f.rho.clone()),
            ("b".into(), f.b.clone()),
            ("mx".into(), f.mx.clone()),
            ("my".into(), f.my.clone()),
            ("q_th".into(), f.qth.clone()),
            ("w".into(), s.w.clone()),
            ("v".into(), s.v.clone()),
            ("theta".into(), s.theta.clone()),
        ];
        for (j, t) in self.buffer.fluid_trace.iter().enumerate() {
            out.push((format!("trace_{j}"), t.clone()));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload = self.payload();
        let header = Header {
            format_version: FORMAT_VERSION,
            endianness: "little".into(),
            nx: self.fluid.grid.n,
            box_halfwidth: self.fluid.grid.halfwidth,
            n_nodes: self.shell.len(),
            substeps: self.buffer.fluid_trace.len(),
            window: self.window,
            time: self.fluid.t,
            ladder: self.ladder.clone(),
            fields: payload
                .iter()
                .map(|(name, v)| FieldMeta {
                    name: name.clone(),
                    len: v.len(),
                })
                .collect(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::new();
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "{json}")?;
        for (_, v) in &payload {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut lines = bytes.splitn(3, |&c| c == b'\n');
        let magic = lines.next().unwrap_or_default();
        if magic != MAGIC.as_bytes() {
            return Err(bad("missing checkpoint magic line".into()));
        }
        let json = lines.next().ok_or_else(|| bad("missing metadata header".into()))?;
        let payload = lines.next().ok_or_else(|| bad("missing payload".into()))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| bad(format!("malformed header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", header.format_version)));
        }
        if header.endianness != "little" {
            return Err(bad(format!(
                "payload byte order '{}' is not supported; expected 'little'",
                header.endianness
            )));
        }
        let cells = header.nx * header.nx;
        let mut expected: Vec<(String, usize)> = vec![("scalars".into(), SCALARS.len())];
        expected.extend(FIELD_ORDER[1..6].iter().map(|n| (n.to_string(), cells)));
        expected.extend(FIELD_ORDER[6..].iter().map(|n| (n.to_string(), header.n_nodes)));
        expected.extend((0..header.substeps).map(|j| (format!("trace_{j}"), header.n_nodes)));
        let declared: Vec<(String, usize)> =
            header.fields.iter().map(|f| (f.name.clone(), f.len)).collect();
        if declared != expected {
            return Err(bad("field table does not match the declared dimensions".into()));
        }
        let total: usize = expected.iter().map(|e| e.1).sum();
        if payload.len() != 8 * total {
            return Err(bad(format!(
                "payload holds {} bytes, header declares {}",
                payload.len(),
                8 * total
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut take = |len: usize| -> Vec<f64> { values.by_ref().take(len).collect() };
        let scalars = take(SCALARS.len());
        let grid = Grid::new(header.nx, header.box_halfwidth);
        let mut fluid = FluidState::zeros(grid);
        fluid.rho = take(cells);
        fluid.b = take(cells);
        fluid.mx = take(cells);
        fluid.my = take(cells);
        fluid.qth = take(cells);
        fluid.t = scalars[0];
        let shell = ShellState {
            w: take(header.n_nodes),
            v: take(header.n_nodes),
            theta: take(header.n_nodes),
            t: scalars[1],
        };
        let buffer = TimeShiftBuffer {
            fluid_trace: (0..header.substeps).map(|_| take(header.n_nodes)).collect(),
        };
        Ok(Self {
            fluid,
            shell,
            buffer,
            cumulative: Cumulative {
                shell_dissipation: scalars[3],
                entropy_production: scalars[4],
                exterior_dissipation: scalars[5],
                sink: scalars[6],
                mismatch: scalars[7],
            },
            window: header.window,
            rho_ref: scalars[2],
            ladder: header.ladder,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_checkpoint(seed: u64) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(6, 2.0);
        let mut fluid = FluidState::zeros(grid);
        for f in [&mut fluid.rho, &mut fluid.b, &mut fluid.mx, &mut fluid.my, &mut fluid.qth] {
            f.iter_mut().for_each(|x| *x = rng.random::<f64>() * 1e3 - 5e2);
        }
        fluid.t = rng.random();
        let mut shell = ShellState::zeros(8);
        for f in [&mut shell.w, &mut shell.v, &mut shell.theta] {
            f.iter_mut().for_each(|x| *x = rng.random::<f64>() - 0.5);
        }
        shell.t = fluid.t;
        Checkpoint {
            fluid,
            shell,
            buffer: TimeShiftBuffer {
                fluid_trace: (0..3).map(|_| (0..8).map(|_| rng.random()).collect()).collect(),
            },
            cumulative: Cumulative {
                shell_dissipation: rng.random(),
                entropy_production: rng.random(),
                exterior_dissipation: rng.random(),
                sink: rng.random(),
                mismatch: rng.random(),
            },
            window: 7,
            rho_ref: 0.1 + 0.2,
            ladder: LadderMeta { dt: 0.01, delta: 0.01, xi: 0.1 },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = random_checkpoint(3);
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.fluid.rho), bits(&c.fluid.rho));
        assert_eq!(bits(&back.fluid.qth), bits(&c.fluid.qth));
        assert_eq!(back.rho_ref.to_bits(), c.rho_ref.to_bits());
        assert_eq!(back, c);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = random_checkpoint(1).to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
    }

    #[test]
    fn foreign_endianness_is_rejected() {
        let bytes = random_checkpoint(2).to_bytes().unwrap();
        let text = String::from_utf8_lossy(&bytes).replacen("\"little\"", "\"big\"", 1);
        let mut swapped = text.as_bytes()[..text.find('\n').unwrap() + 1].to_vec();
        let rest = &text[text.find('\n').unwrap() + 1..];
        swapped.extend_from_slice(&rest.as_bytes()[..rest.find('\n').unwrap() + 1]);
        let err = Checkpoint::from_bytes(&swapped).unwrap_err();
        assert!(err.to_string().contains("byte order"), "{err}");
    }
}
