//! Subject metadata, labelling, balancing and leakage-free splitting.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    /// Cognitively normal (negative class).
    Cn,
    /// Alzheimer's disease (positive class).
    Ad,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Cn, Class::Ad];

    pub fn index(self) -> usize {
        match self {
            Class::Cn => 0,
            Class::Ad => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Class::Cn),
            1 => Some(Class::Ad),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Cn => "CN",
            Class::Ad => "AD",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CN" => Ok(Class::Cn),
            "AD" => Ok(Class::Ad),
            other => Err(Error::UnknownCategory(String::from(other))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Gender::F),
            "M" => Ok(Gender::M),
            other => Err(Error::UnknownCategory(String::from(other))),
        }
    }
}

/// Clinical Dementia Rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cdr {
    Zero,
    Half,
    One,
    Two,
    Three,
}

impl Cdr {
    pub fn from_f64(v: f64) -> Result<Self> {
        match v {
            0.0 => Ok(Cdr::Zero),
            0.5 => Ok(Cdr::Half),
            1.0 => Ok(Cdr::One),
            2.0 => Ok(Cdr::Two),
            3.0 => Ok(Cdr::Three),
            other => Err(invalid(format!("CDR {other} not in {{0, 0.5, 1, 2, 3}}"))),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Cdr::Zero => 0.0,
            Cdr::Half => 0.5,
            Cdr::One => 1.0,
            Cdr::Two => 2.0,
            Cdr::Three => 3.0,
        }
    }
}

/// CDR 0 is CN, CDR ≥ 1 is AD; 0.5 is outside both study classes.
pub fn cdr_to_label(cdr: Cdr) -> Result<Class> {
    match cdr {
        Cdr::Zero => Ok(Class::Cn),
        Cdr::Half => Err(Error::OutsideStudyClasses(0.5)),
        Cdr::One | Cdr::Two | Cdr::Three => Ok(Class::Ad),
    }
}

/// Calendar date `YYYY-MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VisitDate {
    pub year: u16,
    pub month: u8,
    pub day: u8,
}

impl VisitDate {
    pub fn new(year: u16, month: u8, day: u8) -> Result<Self> {
        let leap = (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400);
        let days = match month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            2 if leap => 29,
            2 => 28,
            _ => return Err(invalid(format!("month {month} out of range"))),
        };
        if day == 0 || day > days {
            return Err(invalid(format!("day {day} out of range for {year}-{month:02}")));
        }
        Ok(Self { year, month, day })
    }
}

impl fmt::Display for VisitDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for VisitDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid(format!("visit date {s:?} is not YYYY-MM-DD"));
        let b = s.as_bytes();
        if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
            return Err(bad());
        }
        let year = s[0..4].parse().map_err(|_| bad())?;
        let month = s[5..7].parse().map_err(|_| bad())?;
        let day = s[8..10].parse().map_err(|_| bad())?;
        Self::new(year, month, day)
    }
}

/// One visit of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub visit_date: VisitDate,
    pub age: f64,
    pub mmse: u32,
    pub gender: Gender,
    pub cdr: Cdr,
    pub volume_path: String,
    /// ROI name → mask file.
    pub roi_masks: BTreeMap<String, String>,
}

impl SubjectRecord {
    pub fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(invalid("empty subject_id"));
        }
        if !(self.age > 0.0) || !self.age.is_finite() {
            return Err(invalid(format!("{}: age {} must be positive", self.subject_id, self.age)));
        }
        if self.mmse > 30 {
            return Err(invalid(format!("{}: MMSE {} exceeds 30", self.subject_id, self.mmse)));
        }
        Ok(())
    }

    pub fn label(&self) -> Result<Class> {
        cdr_to_label(self.cdr)
    }
}

/// Keeps each subject's latest visit. Equal dates are resolved by the
/// lexicographically larger volume path. Output is ordered by subject id.
pub fn select_latest_visit(records: &[SubjectRecord]) -> Vec<SubjectRecord> {
    let mut latest: BTreeMap<&str, &SubjectRecord> = BTreeMap::new();
    for r in records {
        latest
            .entry(r.subject_id.as_str())
            .and_modify(|cur| {
                if (r.visit_date, &r.volume_path) > (cur.visit_date, &cur.volume_path) {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    latest.into_values().cloned().collect()
}

/// Down-samples the majority class to the minority count. The surviving
/// records keep their input order.
pub fn undersample_balance<R: Rng + ?Sized>(
    records: &[SubjectRecord],
    rng: &mut R,
) -> Result<Vec<SubjectRecord>> {
    let labels = records
        .iter()
        .map(SubjectRecord::label)
        .collect::<Result<Vec<_>>>()?;
    let keep = balance_indices(&labels, rng)?;
    Ok(keep.into_iter().map(|i| records[i].clone()).collect())
}

/// Index-level undersampling; returned indices are ascending.
pub fn balance_indices<R: Rng + ?Sized>(labels: &[Class], rng: &mut R) -> Result<Vec<usize>> {
    let by_class = group_by_class(labels);
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::SingleClass);
    }
    let k = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(2 * k);
    for members in &by_class {
        if members.len() == k {
            keep.extend_from_slice(members);
        } else {
            let mut picked: Vec<usize> = index::sample(rng, members.len(), k)
                .into_iter()
                .map(|j| members[j])
                .collect();
            picked.sort_unstable();
            keep.extend(picked);
        }
    }
    keep.sort_unstable();
    Ok(keep)
}

pub(crate) fn group_by_class(labels: &[Class]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, c) in labels.iter().enumerate() {
        out[c.index()].push(i);
    }
    out
}

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

/// Subject indices of the three partitions, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder allocation of `total` across groups proportional to
/// `sizes`; ties go to the lower group index.
pub fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return alloc::vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut rema: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| ((s * total) % n, i))
        .collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let assigned: usize = alloc.iter().sum();
    for &(_, i) in rema.iter().take(total - assigned) {
        alloc[i] += 1;
    }
    alloc
}

/// Stratified, per-subject split. Validation and test sizes are the
/// rounded targets; the remainder goes to training.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[Class],
    ratios: SplitRatios,
    rng: &mut R,
) -> Result<SplitIndices> {
    let sum = ratios.train + ratios.val + ratios.test;
    if math::abs(sum - 1.0) > 1e-9 || ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 {
        return Err(invalid(format!("split ratios must be non-negative and sum to 1, got {sum}")));
    }
    let n = labels.len();
    if n < 3 {
        return Err(invalid(format!("{n} subjects cannot fill three sets")));
    }
    let val_total = math::round(n as f64 * ratios.val) as usize;
    let test_total = math::round(n as f64 * ratios.test) as usize;
    if val_total + test_total > n {
        return Err(invalid("validation and test sets exceed the subject count"));
    }
    let groups = group_by_class(labels);
    let sizes = [groups[0].len(), groups[1].len()];
    let val_quota = apportion(val_total, &sizes);
    let test_quota = apportion(test_total, &sizes);
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (c, members) in groups.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(rng);
        let (v, rest) = shuffled.split_at(val_quota[c].min(shuffled.len()));
        let (t, tr) = rest.split_at(test_quota[c].min(rest.len()));
        out.val.extend_from_slice(v);
        out.test.extend_from_slice(t);
        out.train.extend_from_slice(tr);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Splits subject records (one per subject) into train/validation/test.
pub fn split_subjects<R: Rng + ?Sized>(
    records: &[SubjectRecord],
    ratios: SplitRatios,
    rng: &mut R,
) -> Result<(Vec<SubjectRecord>, Vec<SubjectRecord>, Vec<SubjectRecord>)> {
    let labels = records
        .iter()
        .map(SubjectRecord::label)
        .collect::<Result<Vec<_>>>()?;
    let split = stratified_split(&labels, ratios, rng)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&split.train), pick(&split.val), pick(&split.test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn record(id: &str, date: &str, cdr: Cdr) -> SubjectRecord {
        SubjectRecord {
            subject_id: String::from(id),
            visit_date: date.parse().unwrap(),
            age: 70.0,
            mmse: 28,
            gender: Gender::F,
            cdr,
            volume_path: format!("{id}_{date}.miv"),
            roi_masks: BTreeMap::new(),
        }
    }

    #[test]
    fn latest_visit_examples() {
        let rs = [
            record("a", "2020-01-01", Cdr::Zero),
            record("a", "2022-05-11", Cdr::Zero),
        ];
        let out = select_latest_visit(&rs);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].visit_date.to_string(), "2022-05-11");

        let single = [record("b", "2019-03-03", Cdr::One)];
        assert_eq!(select_latest_visit(&single), single.to_vec());

        let four = [
            record("a", "2020-01-01", Cdr::Zero),
            record("b", "2021-01-01", Cdr::One),
            record("a", "2019-01-01", Cdr::Zero),
            record("b", "2023-01-01", Cdr::One),
        ];
        assert_eq!(select_latest_visit(&four).len(), 2);
    }

    #[test]
    fn latest_visit_tie_breaks_on_path() {
        let mut x = record("a", "2020-01-01", Cdr::Zero);
        x.volume_path = String::from("a1.miv");
        let mut y = x.clone();
        y.volume_path = String::from("a2.miv");
        let out = select_latest_visit(&[y.clone(), x.clone()]);
        assert_eq!(out[0].volume_path, "a2.miv");
        let out = select_latest_visit(&[x, y]);
        assert_eq!(out[0].volume_path, "a2.miv");
    }

    #[test]
    fn cdr_mapping() {
        assert_eq!(cdr_to_label(Cdr::Zero).unwrap(), Class::Cn);
        assert_eq!(cdr_to_label(Cdr::Two).unwrap(), Class::Ad);
        assert_eq!(cdr_to_label(Cdr::Half), Err(Error::OutsideStudyClasses(0.5)));
        assert!(Cdr::from_f64(1.5).is_err());
    }

    #[test]
    fn dates_parse_and_validate() {
        assert!("2023-02-29".parse::<VisitDate>().is_err());
        assert!("2024-02-29".parse::<VisitDate>().is_ok());
        assert!("2024-2-29".parse::<VisitDate>().is_err());
        assert!("2024-13-01".parse::<VisitDate>().is_err());
    }

    #[test]
    fn undersampling_examples() {
        let mut labels = alloc::vec![Class::Cn; 100];
        labels.extend(std::iter::repeat_n(Class::Ad, 70));
        let keep = balance_indices(&labels, &mut rng::seeded(1)).unwrap();
        let ad = keep.iter().filter(|&&i| labels[i] == Class::Ad).count();
        assert_eq!((keep.len() - ad, ad), (70, 70));
        assert_eq!(keep, balance_indices(&labels, &mut rng::seeded(1)).unwrap());

        let balanced: Vec<Class> = (0..420).map(|i| Class::ALL[i % 2]).collect();
        let keep = balance_indices(&balanced, &mut rng::seeded(2)).unwrap();
        assert_eq!(keep, (0..420).collect::<Vec<_>>());

        assert_eq!(
            balance_indices(&[Class::Cn, Class::Cn], &mut rng::seeded(0)),
            Err(Error::SingleClass)
        );
    }

    #[test]
    fn undersample_rejects_unmapped_cdr() {
        let rs = [record("a", "2020-01-01", Cdr::Half), record("b", "2020-01-01", Cdr::One)];
        assert!(undersample_balance(&rs, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn split_420_subjects() {
        let labels: Vec<Class> = (0..420).map(|i| Class::ALL[i % 2]).collect();
        let s = stratified_split(&labels, SplitRatios::default(), &mut rng::seeded(3)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (294, 63, 63));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..420).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_input() {
        let labels = [Class::Cn, Class::Ad];
        assert!(stratified_split(&labels, SplitRatios::default(), &mut rng::seeded(0)).is_err());
        let bad = SplitRatios {
            train: 0.5,
            val: 0.2,
            test: 0.2,
        };
        let labels = [Class::Cn; 10];
        assert!(stratified_split(&labels, bad, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(63, &[210, 210]), alloc::vec![32, 31]);
        assert_eq!(apportion(5, &[3, 7]), alloc::vec![2, 3]);
        assert_eq!(apportion(4, &[3, 7]), alloc::vec![1, 3]);
        assert_eq!(apportion(0, &[3, 7]), alloc::vec![0, 0]);
    }
}
