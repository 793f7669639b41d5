//! CSV readers and writers for decay series, count records and analytic
//! predictions.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::analytic::AnalyticPrediction;
use crate::cavity::Layout;
use crate::engine::{DecayRecord, DecaySeries, Method, PhaseDistribution, DEFAULT_QUAD_ORDER};
use crate::error::{Error, Result};
use crate::jones::BlochVector;
use crate::tomography::{CountRecord, Projector};

/// Measured spacing of adjacent round-trip peaks.
pub const ROUND_TRIP_NS: f64 = 6.80;
/// Cavity length over the speed of light, 2.01 m / c.
pub const GEOMETRIC_ROUND_TRIP_NS: f64 = 2.01 / 0.299_792_458;

pub const DECAY_COLUMNS: [&str; 11] = [
    "n", "purity", "fidelity", "px", "py", "pz", "method", "layout", "theta", "sigma_phi", "phi0",
];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecayCsvOptions {
    /// Append a `t_ns` column with this many nanoseconds per round trip.
    pub ns_per_round_trip: Option<f64>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Writes one series. A `half_cycle` column is added when the series has
/// half-cycle records.
pub fn write_decay_csv<W: Write>(w: W, series: &DecaySeries, opts: &DecayCsvOptions) -> Result<()> {
    let has_half = series.records.iter().any(|r| r.half_cycle);
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = DECAY_COLUMNS.to_vec();
    if has_half {
        header.push("half_cycle");
    }
    if opts.ns_per_round_trip.is_some() {
        header.push("t_ns");
    }
    wtr.write_record(&header)?;
    let theta = series.theta.map(fmt_f64).unwrap_or_default();
    for r in &series.records {
        let mut row = vec![
            r.n.to_string(),
            fmt_f64(r.purity),
            fmt_f64(r.fidelity),
            fmt_f64(r.bloch.x),
            fmt_f64(r.bloch.y),
            fmt_f64(r.bloch.z),
            series.method.name().to_string(),
            series.layout.name().to_string(),
            theta.clone(),
            fmt_f64(series.dist.sigma_phi),
            fmt_f64(series.dist.phi0),
        ];
        if has_half {
            row.push(u8::from(r.half_cycle).to_string());
        }
        if let Some(ns) = opts.ns_per_round_trip {
            row.push(fmt_f64(ns * series.round_trips(r) as f64));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn column_index(headers: &csv::StringRecord) -> HashMap<String, usize> {
    headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect()
}

fn field<'a>(row: &'a csv::StringRecord, idx: &HashMap<String, usize>, name: &str) -> Result<&'a str> {
    let i = idx
        .get(name)
        .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))?;
    row.get(*i)
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("short row, no {name:?} field")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("{what}: {s:?}: {e}")))
}

/// Reads a series written by [`write_decay_csv`] (or hand-made with the same
/// columns). The input state is taken from `input` if given, otherwise from a
/// pure `n = 0` row. Method details other than the name are not stored, so
/// the returned method carries default parameters.
pub fn read_decay_csv<R: Read>(r: R, label: &str, input: Option<BlochVector>) -> Result<DecaySeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let idx = column_index(rdr.headers()?);
    for c in DECAY_COLUMNS {
        if !idx.contains_key(c) {
            return Err(Error::Parse(format!("missing column {c:?}")));
        }
    }
    let mut records = Vec::new();
    let mut meta: Option<(Layout, Option<f64>, PhaseDistribution, Method)> = None;
    for row in rdr.records() {
        let row = row?;
        let n = field(&row, &idx, "n")?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("n: {e}")))?;
        let half_cycle = match idx.get("half_cycle") {
            Some(&i) => matches!(row.get(i).map(str::trim), Some("1" | "true")),
            None => false,
        };
        let bloch = BlochVector::new(
            parse_f64(field(&row, &idx, "px")?, "px")?,
            parse_f64(field(&row, &idx, "py")?, "py")?,
            parse_f64(field(&row, &idx, "pz")?, "pz")?,
        );
        records.push(DecayRecord {
            n,
            half_cycle,
            purity: parse_f64(field(&row, &idx, "purity")?, "purity")?,
            fidelity: parse_f64(field(&row, &idx, "fidelity")?, "fidelity")?,
            bloch,
            purity_se: None,
        });
        if meta.is_none() {
            let layout: Layout = field(&row, &idx, "layout")?.parse()?;
            let theta = match field(&row, &idx, "theta")? {
                "" => None,
                s => Some(parse_f64(s, "theta")?),
            };
            let dist = PhaseDistribution::new(
                parse_f64(field(&row, &idx, "phi0")?, "phi0")?,
                parse_f64(field(&row, &idx, "sigma_phi")?, "sigma_phi")?,
            )?;
            let method = match field(&row, &idx, "method")? {
                "monte-carlo" => Method::MonteCarlo {
                    samples: crate::engine::DEFAULT_MC_SAMPLES,
                    seed: 0,
                },
                _ => Method::Quadrature {
                    order: DEFAULT_QUAD_ORDER,
                },
            };
            meta = Some((layout, theta, dist, method));
        }
    }
    let (layout, theta, dist, method) =
        meta.ok_or_else(|| Error::Parse("decay series has no rows".into()))?;
    let input = input.or_else(|| {
        records
            .iter()
            .find(|r| r.n == 0 && !r.half_cycle && (r.bloch.norm() - 1.0).abs() < 1e-6)
            .and_then(|r| r.bloch.normalized())
    });
    Ok(DecaySeries {
        label: label.to_string(),
        layout,
        theta,
        dist,
        method,
        input,
        records,
    })
}

pub const COUNT_COLUMNS: [&str; 7] = ["n_trip", "H", "V", "D", "A", "R", "L"];

pub fn write_counts_csv<W: Write>(w: W, records: &[CountRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(COUNT_COLUMNS)?;
    for r in records {
        let mut row = vec![r.n_trip.to_string()];
        row.extend(r.counts.iter().map(u64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `n_trip, H, V, D, A, R, L` in any column order.
pub fn read_counts_csv<R: Read>(r: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    };
    let trip = find("n_trip")?;
    let cols = Projector::ALL
        .iter()
        .map(|p| find(p.name()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let get = |i: usize| -> Result<u64> {
            let s = row.get(i).unwrap_or("").trim();
            s.parse::<u64>()
                .map_err(|e| Error::InvalidCounts(format!("{s:?} is not a nonnegative integer: {e}")))
        };
        let mut counts = [0u64; 6];
        for (k, &c) in cols.iter().enumerate() {
            counts[k] = get(c)?;
        }
        out.push(CountRecord::new(get(trip)?, counts));
    }
    Ok(out)
}

pub fn write_analytic_csv<W: Write>(w: W, pred: &AnalyticPrediction) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["n", "D_n", "gamma_n", "purity", "fidelity"].into_iter().map(String::from).collect::<Vec<_>>();
    for i in 1..=3 {
        for j in 1..=3 {
            header.push(format!("v{i}{j}"));
        }
    }
    wtr.write_record(&header)?;
    for r in &pred.records {
        let mut row = vec![
            r.n.to_string(),
            fmt_f64(r.d),
            fmt_f64(r.gamma),
            fmt_f64(r.purity),
            fmt_f64(r.fidelity),
        ];
        for i in 0..3 {
            for j in 0..3 {
                row.push(fmt_f64(r.v[(i, j)]));
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::CavityConfig;
    use crate::engine::{evolve, EvolutionConfig};
    use crate::jones::JonesVector;

    #[test]
    fn decay_round_trip() {
        let cfg = CavityConfig::generic(Layout::GenericBB, 0.7).unwrap();
        let dist = PhaseDistribution::new(-0.2, 0.0839).unwrap();
        let evo = EvolutionConfig::new(5, Method::default()).unwrap().with_half_cycles(true);
        let s = evolve(&cfg, &dist, &JonesVector::right().bloch(), &evo).unwrap();
        let mut buf = Vec::new();
        write_decay_csv(&mut buf, &s, &DecayCsvOptions { ns_per_round_trip: Some(ROUND_TRIP_NS) }).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,purity,fidelity,px,py,pz,method,layout,theta,sigma_phi,phi0,half_cycle,t_ns\n"));
        let back = read_decay_csv(buf.as_slice(), "R", None).unwrap();
        assert_eq!(back.records, s.records.iter().map(|r| DecayRecord { purity_se: None, ..*r }).collect::<Vec<_>>());
        assert!(back.input.unwrap().distance(&s.input.unwrap()) < 1e-15);
        assert_eq!(back.layout, Layout::GenericBB);
        assert_eq!(back.theta, Some(0.7));
    }

    #[test]
    fn counts_round_trip() {
        let recs = vec![CountRecord::new(0, [1, 2, 3, 4, 5, 6]), CountRecord::new(2, [9, 0, 4, 5, 7, 2])];
        let mut buf = Vec::new();
        write_counts_csv(&mut buf, &recs).unwrap();
        assert_eq!(read_counts_csv(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn counts_reject_negative() {
        let text = "n_trip,H,V,D,A,R,L\n0,1,-2,3,4,5,6\n";
        assert!(matches!(read_counts_csv(text.as_bytes()), Err(Error::InvalidCounts(_))));
    }

    #[test]
    fn missing_columns_rejected() {
        assert!(read_decay_csv("n,purity\n0,1\n".as_bytes(), "x", None).is_err());
        assert!(read_counts_csv("n_trip,H,V\n0,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn geometric_round_trip_time() {
        assert!((GEOMETRIC_ROUND_TRIP_NS - 6.7046).abs() < 1e-4);
    }
}
