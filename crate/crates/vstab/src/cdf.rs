//! IEEE Common Data Format reader and writer.
//!
//! Only the title card and the bus and branch sections are used. Bus cards
//! carry the bus number in columns 1-4 and the name in columns 6-17; the
//! remaining fields are read as whitespace-separated tokens, which accepts
//! both strictly columnar files and the loosely aligned archive files.

use std::fmt::Write as _;

use thiserror::Error;
use vstab_core::netmodel::{Branch, BranchId, Bus, BusId, BusKind, CaseError, Load, Machine, NetworkCase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CdfError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("invalid case: {0}")]
    Structure(#[from] CaseError),
}

fn malformed(line: usize, message: impl Into<String>) -> CdfError {
    CdfError::Malformed {
        line,
        message: message.into(),
    }
}

/// Characters `from..=to` (1-based columns), clipped to the line.
fn columns(line: &str, from: usize, to: usize) -> &str {
    let start = (from - 1).min(line.len());
    let end = to.min(line.len());
    line.get(start..end).unwrap_or("")
}

fn number<T: std::str::FromStr>(tok: Option<&str>, line: usize, field: &str) -> Result<T, CdfError> {
    let tok = tok.ok_or_else(|| malformed(line, format!("missing {field}")))?;
    tok.parse()
        .map_err(|_| malformed(line, format!("bad {field} '{tok}'")))
}

/// Parses a CDF file into a validated case.
///
/// PV and swing buses get one synchronous generator each, with the desired
/// voltage as setpoint. Non-transformer branches are marked outage-eligible.
pub fn parse_cdf(text: &str) -> Result<NetworkCase, CdfError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (title_no, title) = lines
        .next()
        .ok_or(CdfError::MissingSection("title"))?;
    let base_mva: f64 = number(Some(columns(title, 32, 37).trim()), title_no, "base MVA")?;

    let mut case = NetworkCase {
        base_mva,
        buses: Vec::new(),
        branches: Vec::new(),
        loads: Vec::new(),
        machines: Vec::new(),
    };
    let mut saw_bus = false;
    let mut saw_branch = false;
    while let Some((_, line)) = lines.next() {
        if line.starts_with("BUS DATA FOLLOWS") {
            saw_bus = true;
            for (no, line) in lines.by_ref() {
                if line.trim_start().starts_with("-999") {
                    break;
                }
                parse_bus(&mut case, no, line)?;
            }
        } else if line.starts_with("BRANCH DATA FOLLOWS") {
            saw_branch = true;
            for (no, line) in lines.by_ref() {
                if line.trim_start().starts_with("-999") {
                    break;
                }
                parse_branch(&mut case, no, line)?;
            }
        } else if line.starts_with("END OF DATA") {
            break;
        }
    }
    if !saw_bus {
        return Err(CdfError::MissingSection("bus data"));
    }
    if !saw_branch {
        return Err(CdfError::MissingSection("branch data"));
    }
    case.validate()?;
    Ok(case)
}

fn parse_bus(case: &mut NetworkCase, no: usize, line: &str) -> Result<(), CdfError> {
    if line.trim().is_empty() {
        return Ok(());
    }
    let id: u32 = number(Some(columns(line, 1, 4).trim()), no, "bus number")?;
    let name = columns(line, 6, 17).trim_end().to_string();
    let mut tok = columns(line, 18, line.len()).split_whitespace();
    let _area: i64 = number(tok.next(), no, "area")?;
    let _zone: i64 = number(tok.next(), no, "loss zone")?;
    let ty: u8 = number(tok.next(), no, "bus type")?;
    let _v_final: f64 = number(tok.next(), no, "final voltage")?;
    let _angle: f64 = number(tok.next(), no, "final angle")?;
    let load_p: f64 = number(tok.next(), no, "load MW")?;
    let load_q: f64 = number(tok.next(), no, "load MVAr")?;
    let gen_p: f64 = number(tok.next(), no, "generation MW")?;
    let gen_q: f64 = number(tok.next(), no, "generation MVAr")?;
    let base_kv: f64 = number(tok.next(), no, "base kV")?;
    let v_desired: f64 = number(tok.next(), no, "desired voltage")?;
    let q_max: f64 = number(tok.next(), no, "max MVAr")?;
    let q_min: f64 = number(tok.next(), no, "min MVAr")?;
    let shunt_g: f64 = number(tok.next(), no, "shunt G")?;
    let shunt_b: f64 = number(tok.next(), no, "shunt B")?;

    let kind = match ty {
        0 | 1 => BusKind::PQ,
        2 => BusKind::PV,
        3 => BusKind::Slack,
        other => return Err(malformed(no, format!("bad bus type {other}"))),
    };
    let bus = BusId(id);
    case.buses.push(Bus {
        id: bus,
        name,
        kind,
        v_setpoint: (kind != BusKind::PQ).then_some(v_desired),
        shunt_g,
        shunt_b,
        base_kv,
    });
    if load_p != 0.0 || load_q != 0.0 {
        case.loads.push(Load {
            bus,
            p: load_p,
            q: load_q,
            scalable: true,
        });
    }
    if kind != BusKind::PQ {
        let mut m = Machine::sync_gen(bus, gen_p, v_desired, q_min, q_max);
        m.q_set = gen_q;
        case.machines.push(m);
    }
    Ok(())
}

fn parse_branch(case: &mut NetworkCase, no: usize, line: &str) -> Result<(), CdfError> {
    if line.trim().is_empty() {
        return Ok(());
    }
    let mut tok = line.split_whitespace();
    let from: u32 = number(tok.next(), no, "tap bus")?;
    let to: u32 = number(tok.next(), no, "Z bus")?;
    let _area: i64 = number(tok.next(), no, "area")?;
    let _zone: i64 = number(tok.next(), no, "loss zone")?;
    let circuit: u32 = number(tok.next(), no, "circuit")?;
    let ty: u8 = number(tok.next(), no, "branch type")?;
    let r: f64 = number(tok.next(), no, "R")?;
    let x: f64 = number(tok.next(), no, "X")?;
    let b: f64 = number(tok.next(), no, "B")?;
    for field in ["rating 1", "rating 2", "rating 3", "control bus", "side"] {
        let _: f64 = number(tok.next(), no, field)?;
    }
    let ratio: f64 = number(tok.next(), no, "turns ratio")?;
    let is_transformer = ty != 0 || ratio != 0.0;
    case.branches.push(Branch {
        id: BranchId(case.branches.len() as u32 + 1),
        from_bus: BusId(from),
        to_bus: BusId(to),
        r,
        x,
        b_charging: b,
        tap_ratio: if ratio == 0.0 { 1.0 } else { ratio },
        is_transformer,
        circuit_id: if circuit <= 1 {
            String::new()
        } else {
            format!("/{circuit}")
        },
        outage_eligible: !is_transformer,
        in_service: true,
    });
    Ok(())
}

fn bus_type_code(kind: BusKind) -> u8 {
    match kind {
        BusKind::PQ => 0,
        BusKind::PV => 2,
        BusKind::Slack => 3,
    }
}

/// Writes a case in CDF layout. Numbers use the shortest exact decimal form,
/// so `parse_cdf(&write_cdf(c))` reproduces a parsed case exactly.
///
/// Each regulated bus is written with its first machine only.
pub fn write_cdf(case: &NetworkCase) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        " {:<8} {:<20} {:>6}  {:<4} {} {}",
        "01/01/00", "vstab", case.base_mva, "0000", "S", "exported case"
    );
    let _ = writeln!(out, "BUS DATA FOLLOWS                            {} ITEMS", case.buses.len());
    for bus in &case.buses {
        let (pl, ql) = case
            .loads
            .iter()
            .filter(|l| l.bus == bus.id)
            .fold((0.0, 0.0), |a, l| (a.0 + l.p, a.1 + l.q));
        let m = case.machines.iter().find(|m| m.bus == bus.id);
        let (pg, qg, qmax, qmin) = m.map_or((0.0, 0.0, 0.0, 0.0), |m| (m.p_set, m.q_set, m.q_max, m.q_min));
        let v = bus.v_setpoint.unwrap_or(1.0);
        let _ = writeln!(
            out,
            "{:>4} {:<12.12} 1  1 {} {} 0 {} {} {} {} {} {} {} {} {} {} 0",
            bus.id.0,
            bus.name,
            bus_type_code(bus.kind),
            v,
            pl,
            ql,
            pg,
            qg,
            bus.base_kv,
            bus.v_setpoint.unwrap_or(0.0),
            qmax,
            qmin,
            bus.shunt_g,
            bus.shunt_b,
        );
    }
    out.push_str("-999\n");
    let _ = writeln!(out, "BRANCH DATA FOLLOWS                         {} ITEMS", case.branches.len());
    for br in &case.branches {
        let circuit: u32 = br
            .circuit_id
            .strip_prefix('/')
            .and_then(|c| c.parse().ok())
            .unwrap_or(1);
        let ratio = if br.is_transformer { br.tap_ratio } else { 0.0 };
        let _ = writeln!(
            out,
            "{:>4} {:>4}  1  1 {} {} {} {} {} 0 0 0 0 0 {} 0 0 0 0 0 0",
            br.from_bus.0,
            br.to_bus.0,
            circuit,
            u8::from(br.is_transformer),
            br.r,
            br.x,
            br.b_charging,
            ratio,
        );
    }
    out.push_str("-999\nEND OF DATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "\
 01/01/00 hand written           100.0  2000 S two bus
BUS DATA FOLLOWS                             2 ITEMS
   1 Slack        1  1  3 1.000    0.0      0.0      0.0      0.0     0.0   138.0 1.000   999.0  -999.0   0.0    0.0        0
   2 Load         1  1  0 1.000    0.0     50.0     10.0      0.0     0.0   138.0 0.000     0.0     0.0   0.0    0.0        0
-999
BRANCH DATA FOLLOWS                          1 ITEMS
   1    2  1  1 1 0  0.0       0.1        0.0          0     0     0    0 0  0.0       0.0 0.0    0.0     0.0    0.0   0.0
-999
END OF DATA
";

    #[test]
    fn hand_written_two_bus() {
        let case = parse_cdf(TWO_BUS).unwrap();
        assert_eq!(case.buses.len(), 2);
        assert_eq!(case.branches.len(), 1);
        assert_eq!(case.base_mva, 100.0);
        assert_eq!(case.buses[1].name, "Load");
        assert_eq!(case.branches[0].x, 0.1);
        assert_eq!(case.branches[0].tap_ratio, 1.0);
        assert_eq!(case.loads[0].p, 50.0);
        assert_eq!(case.slack_bus(), Some(BusId(1)));
    }

    #[test]
    fn malformed_line_is_reported() {
        let bad = TWO_BUS.replace("  0 1.000    0.0     50.0", "  0 1.000    0.0     5x.0");
        match parse_cdf(&bad) {
            Err(CdfError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_bus_section_has_no_slack() {
        let text = " 01/01/00 x                      100.0\nBUS DATA FOLLOWS\n-999\nBRANCH DATA FOLLOWS\n-999\n";
        assert_eq!(parse_cdf(text), Err(CdfError::Structure(CaseError::NoSlack)));
    }

    #[test]
    fn duplicate_bus_is_structural() {
        let dup = TWO_BUS.replace("   2 Load    ", "   1 Load    ");
        assert!(matches!(
            parse_cdf(&dup),
            Err(CdfError::Structure(CaseError::DuplicateBus(_)))
        ));
    }

    #[test]
    fn missing_sections() {
        assert_eq!(parse_cdf(""), Err(CdfError::MissingSection("title")));
        let no_branch = " 01/01/00 x                      100.0\nBUS DATA FOLLOWS\n-999\n";
        assert_eq!(parse_cdf(no_branch), Err(CdfError::MissingSection("branch data")));
    }
}
