//! `.ckt` netlist parsing and structural queries.
//!
//! One card per line: `<name> <net...> <kind> [key=value...]`. The device kind
//! is always explicit; the leading letter of a name carries no meaning. `#`
//! starts a comment that runs to the end of the line, and an optional
//! `.netlist <name>` directive names the circuit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact parameter value. Matching compares these without tolerance.
pub type Value = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("duplicate device `{0}`")]
    DuplicateDevice(String),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Nmos,
    Pmos,
    Resistor,
    Capacitor,
}

impl DeviceKind {
    pub fn is_mos(self) -> bool {
        matches!(self, DeviceKind::Nmos | DeviceKind::Pmos)
    }

    /// Accepted terminal counts for this kind.
    pub fn terminal_counts(self) -> &'static [usize] {
        match self {
            DeviceKind::Nmos | DeviceKind::Pmos => &[4],
            DeviceKind::Resistor => &[2],
            DeviceKind::Capacitor => &[2, 3],
        }
    }

    pub fn terminal_name(self, index: usize) -> &'static str {
        const MOS: [&str; 4] = ["drain", "gate", "source", "bulk"];
        const TWO: [&str; 3] = ["plus", "minus", "sub"];
        if self.is_mos() {
            MOS.get(index).copied().unwrap_or("?")
        } else {
            TWO.get(index).copied().unwrap_or("?")
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Nmos => "nmos",
            DeviceKind::Pmos => "pmos",
            DeviceKind::Resistor => "resistor",
            DeviceKind::Capacitor => "capacitor",
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nmos" => Ok(DeviceKind::Nmos),
            "pmos" => Ok(DeviceKind::Pmos),
            "resistor" => Ok(DeviceKind::Resistor),
            "capacitor" => Ok(DeviceKind::Capacitor),
            other => Err(format!("unknown device kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParamKey {
    W,
    L,
    #[serde(rename = "value")]
    Value,
}

impl ParamKey {
    fn parse(key: &str) -> Option<ParamKey> {
        match key.to_ascii_lowercase().as_str() {
            "w" => Some(ParamKey::W),
            "l" => Some(ParamKey::L),
            "value" => Some(ParamKey::Value),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamKey::W => "W",
            ParamKey::L => "L",
            ParamKey::Value => "value",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Device {
    pub name: String,
    pub kind: DeviceKind,
    /// Net names in terminal order (MOS: drain, gate, source, bulk).
    pub terminals: Vec<String>,
    pub params: BTreeMap<ParamKey, Value>,
}

impl Device {
    pub fn param(&self, key: ParamKey) -> Option<&Value> {
        self.params.get(&key)
    }

    pub fn terminal_name(&self, index: usize) -> &'static str {
        self.kind.terminal_name(index)
    }

    /// Source net of a MOS device.
    pub fn source_net(&self) -> Option<&str> {
        self.kind.is_mos().then(|| self.terminals[2].as_str())
    }
}

/// A single terminal attached to a net.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attachment {
    pub device: String,
    pub terminal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Netlist {
    pub name: String,
    pub devices: BTreeMap<String, Device>,
    pub nets: BTreeMap<String, Vec<Attachment>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiffPair {
    pub a: String,
    pub b: String,
    pub shared_net: String,
}

pub const DEFAULT_NETLIST_NAME: &str = "top";

/// Parses `.ckt` text into a [`Netlist`].
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut name: Option<String> = None;
    let mut devices: BTreeMap<String, Device> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |reason: String| NetlistError::Syntax { line, reason };
        let tokens: Vec<&str> = content.split_whitespace().collect();

        if let Some(directive) = tokens[0].strip_prefix('.') {
            match (directive, tokens.len()) {
                ("netlist", 2) => {
                    if name.is_some() {
                        return Err(syntax("duplicate .netlist directive".into()));
                    }
                    check_ident(tokens[1]).map_err(syntax)?;
                    name = Some(tokens[1].to_string());
                }
                ("netlist", _) => return Err(syntax(".netlist takes exactly one name".into())),
                _ => return Err(syntax(format!("unknown directive `.{directive}`"))),
            }
            continue;
        }

        let device = parse_card(&tokens).map_err(syntax)?;
        if devices.contains_key(&device.name) {
            return Err(NetlistError::DuplicateDevice(device.name));
        }
        devices.insert(device.name.clone(), device);
    }

    Ok(Netlist::from_devices(
        name.unwrap_or_else(|| DEFAULT_NETLIST_NAME.to_string()),
        devices,
    ))
}

fn check_ident(tok: &str) -> Result<(), String> {
    if tok.is_empty() || tok.starts_with('.') || tok.contains('=') || tok.contains('#') {
        return Err(format!("invalid identifier `{tok}`"));
    }
    Ok(())
}

fn parse_card(tokens: &[&str]) -> Result<Device, String> {
    let name = tokens[0];
    check_ident(name)?;
    let param_start = tokens
        .iter()
        .position(|t| t.contains('='))
        .unwrap_or(tokens.len());
    if let Some(bad) = tokens[param_start..].iter().find(|t| !t.contains('=')) {
        return Err(format!("expected key=value after device kind, found `{bad}`"));
    }
    if param_start < 2 {
        return Err(format!("device `{name}` is missing its kind"));
    }
    let kind: DeviceKind = tokens[param_start - 1].parse()?;
    let terminals: Vec<String> = tokens[1..param_start - 1]
        .iter()
        .map(|t| {
            check_ident(t)?;
            Ok(t.to_string())
        })
        .collect::<Result<_, String>>()?;
    if !kind.terminal_counts().contains(&terminals.len()) {
        return Err(format!(
            "{kind} `{name}` needs {} terminals, got {}",
            kind.terminal_counts()
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" or "),
            terminals.len()
        ));
    }

    let mut params = BTreeMap::new();
    for tok in &tokens[param_start..] {
        let (key, value) = tok.split_once('=').expect("checked above");
        let key = ParamKey::parse(key).ok_or_else(|| format!("unknown parameter `{key}`"))?;
        let value = parse_value(value)?;
        if value.is_negative() {
            return Err(format!("parameter {} must be nonnegative", key.as_str()));
        }
        if params.insert(key, value).is_some() {
            return Err(format!("parameter {} given twice", key.as_str()));
        }
    }

    Ok(Device {
        name: name.to_string(),
        kind,
        terminals,
        params,
    })
}

/// Parses a parameter value: an integer fraction `n/d`, or a decimal with an
/// optional exponent and SPICE scale suffix (`f p n u m k meg g t`).
pub fn parse_value(text: &str) -> Result<Value, String> {
    let bad = || format!("invalid number `{text}`");
    if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.parse().map_err(|_| bad())?;
        let d: i128 = d.parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }

    let lower = text.to_ascii_lowercase();
    let (body, scale): (&str, i32) = if let Some(b) = lower.strip_suffix("meg") {
        (b, 6)
    } else {
        match lower.chars().last() {
            Some('f') => (&lower[..lower.len() - 1], -15),
            Some('p') => (&lower[..lower.len() - 1], -12),
            Some('n') => (&lower[..lower.len() - 1], -9),
            Some('u') => (&lower[..lower.len() - 1], -6),
            Some('m') => (&lower[..lower.len() - 1], -3),
            Some('k') => (&lower[..lower.len() - 1], 3),
            Some('g') => (&lower[..lower.len() - 1], 9),
            Some('t') => (&lower[..lower.len() - 1], 12),
            _ => (lower.as_str(), 0),
        }
    };

    let (mantissa, exp) = match body.split_once('e') {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
        None => (body, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: i128 = all_digits.parse().map_err(|_| bad())?;
    if negative {
        numer = -numer;
    }
    let power = exp
        .checked_add(scale)
        .and_then(|p| p.checked_sub(frac_part.len() as i32))
        .ok_or_else(bad)?;
    let ten_pow = |p: u32| 10i128.checked_pow(p).ok_or_else(bad);
    let value = if power >= 0 {
        Ratio::from_integer(numer.checked_mul(ten_pow(power as u32)?).ok_or_else(bad)?)
    } else {
        Ratio::new(numer, ten_pow(power.unsigned_abs())?)
    };
    Ok(value)
}

/// Canonical text for a value: an integer, or a reduced `n/d` fraction.
pub fn format_value(v: &Value) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

impl Netlist {
    /// Builds a netlist and derives its net attachment lists.
    pub fn from_devices(name: String, devices: BTreeMap<String, Device>) -> Netlist {
        let mut nets: BTreeMap<String, Vec<Attachment>> = BTreeMap::new();
        for device in devices.values() {
            for (terminal, net) in device.terminals.iter().enumerate() {
                nets.entry(net.clone()).or_default().push(Attachment {
                    device: device.name.clone(),
                    terminal,
                });
            }
        }
        // Devices iterate in name order, so each list is already ordered by
        // (device, terminal).
        Netlist {
            name,
            devices,
            nets,
        }
    }

    /// An empty netlist with the given name.
    pub fn default_named(name: &str) -> Netlist {
        Netlist {
            name: name.to_string(),
            ..Netlist::default()
        }
    }

    pub fn device(&self, name: &str) -> Option<&Device> {
        self.devices.get(name)
    }

    pub fn has_net(&self, net: &str) -> bool {
        self.nets.contains_key(net)
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// All terminals on `net`, ordered by device name then terminal index.
    pub fn net_terminals(&self, net: &str) -> Result<Vec<(String, usize)>, NetlistError> {
        let attachments = self
            .nets
            .get(net)
            .ok_or_else(|| NetlistError::UnknownNet(net.to_string()))?;
        Ok(attachments
            .iter()
            .map(|a| (a.device.clone(), a.terminal))
            .collect())
    }

    /// Every unordered pair of same-kind MOS devices with equal W and L that
    /// share a source net, sorted by name.
    pub fn find_differential_pairs(&self) -> Vec<DiffPair> {
        let mos: Vec<&Device> = self.devices.values().filter(|d| d.kind.is_mos()).collect();
        let mut pairs = Vec::new();
        for (i, a) in mos.iter().enumerate() {
            for b in &mos[i + 1..] {
                if is_diff_pair(a, b) {
                    pairs.push(DiffPair {
                        a: a.name.clone(),
                        b: b.name.clone(),
                        shared_net: a.terminals[2].clone(),
                    });
                }
            }
        }
        pairs
    }

    /// Groups of two or more `kind` devices whose parameters are identical.
    /// Members are name-ordered and groups are ordered by their first member.
    pub fn find_matched_groups(&self, kind: DeviceKind) -> Vec<Vec<String>> {
        let mut by_params: BTreeMap<&BTreeMap<ParamKey, Value>, Vec<String>> = BTreeMap::new();
        for d in self.devices.values().filter(|d| d.kind == kind) {
            by_params.entry(&d.params).or_default().push(d.name.clone());
        }
        let mut groups: Vec<Vec<String>> =
            by_params.into_values().filter(|g| g.len() >= 2).collect();
        groups.sort();
        groups
    }

    /// Canonical `.ckt` text. Reparses to an equal netlist.
    pub fn to_ckt(&self) -> String {
        let mut out = format!(".netlist {}\n", self.name);
        for d in self.devices.values() {
            out.push_str(&d.name);
            for t in &d.terminals {
                out.push(' ');
                out.push_str(t);
            }
            out.push(' ');
            out.push_str(d.kind.as_str());
            for (k, v) in &d.params {
                out.push_str(&format!(" {}={}", k.as_str(), format_value(v)));
            }
            out.push('\n');
        }
        out
    }

    /// Number of non-comment device cards.
    pub fn card_count(&self) -> usize {
        self.devices.len()
    }
}

/// The differential pair predicate: same MOS kind, equal W and L, shared source.
pub fn is_diff_pair(a: &Device, b: &Device) -> bool {
    a.name != b.name
        && a.kind == b.kind
        && a.kind.is_mos()
        && a.param(ParamKey::W) == b.param(ParamKey::W)
        && a.param(ParamKey::L) == b.param(ParamKey::L)
        && a.terminals[2] == b.terminals[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    const OTA_SNIPPET: &str = "\
# input pair
M34 net0130 VIM PTAIL VDD pmos W=2 L=1
M35 net0132 VIP PTAIL VDD pmos W=2 L=1
M1 NTAIL NBIAS_TAIL GND GND nmos W=4 L=1
C3 VIM net096 GND capacitor value=1p
C2 VIP net092 GND capacitor value=1p
";

    #[test]
    fn parses_mos_card_in_terminal_order() {
        let n = parse_netlist("M34 net0130 VIM PTAIL VDD pmos W=2 L=1").unwrap();
        let d = n.device("M34").unwrap();
        assert_eq!(d.kind, DeviceKind::Pmos);
        assert_eq!(d.terminals, ["net0130", "VIM", "PTAIL", "VDD"]);
        assert_eq!(d.param(ParamKey::W), Some(&Value::from_integer(2)));
    }

    #[test]
    fn empty_text_is_empty_netlist() {
        let n = parse_netlist("").unwrap();
        assert_eq!(n.devices.len(), 0);
        assert_eq!(n.nets.len(), 0);
        let n = parse_netlist("# only a comment\n\n   \n").unwrap();
        assert!(n.is_empty());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_netlist("M1 a b c d nmos\nM2 a b nmos W=1").unwrap_err();
        assert_eq!(
            err,
            NetlistError::Syntax {
                line: 2,
                reason: "nmos `M2` needs 4 terminals, got 2".into()
            }
        );
        assert!(matches!(
            parse_netlist("M1 a b c d fet").unwrap_err(),
            NetlistError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            parse_netlist("R1 a b resistor value=-3").unwrap_err(),
            NetlistError::Syntax { .. }
        ));
        assert!(matches!(
            parse_netlist("R1 a b resistor value=3 x").unwrap_err(),
            NetlistError::Syntax { .. }
        ));
        assert!(matches!(
            parse_netlist("R1 a b resistor Q=3").unwrap_err(),
            NetlistError::Syntax { .. }
        ));
        assert!(matches!(
            parse_netlist("W=1").unwrap_err(),
            NetlistError::Syntax { .. }
        ));
    }

    #[test]
    fn duplicate_device_is_rejected() {
        let err = parse_netlist("R1 a b resistor\nR1 c d resistor").unwrap_err();
        assert_eq!(err, NetlistError::DuplicateDevice("R1".into()));
    }

    #[test]
    fn names_are_case_preserving() {
        let n = parse_netlist("m1 Out in Gnd gnd nmos").unwrap();
        assert!(n.device("m1").is_some());
        assert!(n.has_net("Gnd") && n.has_net("gnd") && n.has_net("Out"));
    }

    #[test]
    fn value_suffixes_are_exact() {
        assert_eq!(parse_value("1p").unwrap(), Ratio::new(1, 1_000_000_000_000));
        assert_eq!(parse_value("1000f").unwrap(), parse_value("1p").unwrap());
        assert_eq!(parse_value("2.5k").unwrap(), Ratio::from_integer(2500));
        assert_eq!(parse_value("1meg").unwrap(), Ratio::from_integer(1_000_000));
        assert_eq!(parse_value("3/6").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_value("1.5e-3").unwrap(), Ratio::new(3, 2000));
        assert!(parse_value("abc").is_err());
        assert!(parse_value("1/0").is_err());
        assert!(parse_value("1e400").is_err());
        assert!(parse_value(".").is_err());
    }

    #[test]
    fn diff_pair_found_in_snippet() {
        let n = parse_netlist(OTA_SNIPPET).unwrap();
        let pairs = n.find_differential_pairs();
        assert_eq!(
            pairs,
            vec![DiffPair {
                a: "M34".into(),
                b: "M35".into(),
                shared_net: "PTAIL".into()
            }]
        );
    }

    #[test]
    fn single_transistor_has_no_pairs() {
        let n = parse_netlist("M1 d g s b nmos W=1 L=1").unwrap();
        assert!(n.find_differential_pairs().is_empty());
    }

    #[test]
    fn matched_capacitors_group() {
        let n = parse_netlist(OTA_SNIPPET).unwrap();
        assert_eq!(
            n.find_matched_groups(DeviceKind::Capacitor),
            vec![vec!["C2".to_string(), "C3".to_string()]]
        );
        let distinct = parse_netlist("C1 a b capacitor value=1\nC2 a b capacitor value=2").unwrap();
        assert!(distinct.find_matched_groups(DeviceKind::Capacitor).is_empty());
    }

    #[test]
    fn net_terminals_ordering_and_errors() {
        let n = parse_netlist(OTA_SNIPPET).unwrap();
        assert_eq!(
            n.net_terminals("PTAIL").unwrap(),
            vec![("M34".to_string(), 2), ("M35".to_string(), 2)]
        );
        assert_eq!(n.net_terminals("NTAIL").unwrap().len(), 1);
        assert_eq!(
            n.net_terminals("nope").unwrap_err(),
            NetlistError::UnknownNet("nope".into())
        );
    }

    #[test]
    fn canonical_text_reparses() {
        let n = parse_netlist(OTA_SNIPPET).unwrap();
        assert_eq!(parse_netlist(&n.to_ckt()).unwrap(), n);
    }
}
