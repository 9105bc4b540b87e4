//! Published per-class image counts for the WomenSports dataset.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub class_name: &'static str,
    pub train: usize,
    pub test: usize,
}

impl TableRow {
    const fn new(class_name: &'static str, train: usize, test: usize) -> Self {
        Self { class_name, train, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.test
    }
}

/// Rows in published order (train count, test count; total is their sum).
pub const WOMENSPORTS: [TableRow; 50] = [
    TableRow::new("Archery", 30, 574),
    TableRow::new("Artistic_Swimming", 30, 553),
    TableRow::new("Badminton", 32, 625),
    TableRow::new("Baseball", 30, 571),
    TableRow::new("Basketball", 40, 757),
    TableRow::new("Bobsleigh", 32, 608),
    TableRow::new("Boxing", 35, 648),
    TableRow::new("Canoeing", 33, 646),
    TableRow::new("Cheerleading", 32, 611),
    TableRow::new("Cricket", 35, 667),
    TableRow::new("Curling", 30, 583),
    TableRow::new("Cycling", 32, 611),
    TableRow::new("Diving", 30, 587),
    TableRow::new("Equestrian", 33, 635),
    TableRow::new("Fencing", 33, 646),
    TableRow::new("Football", 33, 646),
    TableRow::new("Golf", 32, 604),
    TableRow::new("Gymnastic-Beam", 30, 583),
    TableRow::new("Gymnastic-Floor", 33, 635),
    TableRow::new("Hammer-Throw", 33, 635),
    TableRow::new("Handball", 33, 629),
    TableRow::new("High-Jump", 32, 594),
    TableRow::new("Hockey", 36, 691),
    TableRow::new("Ice-Hockey", 36, 691),
    TableRow::new("Javelin", 35, 665),
    TableRow::new("Judo", 40, 708),
    TableRow::new("Kabaddi", 30, 571),
    TableRow::new("Long-Jump", 40, 729),
    TableRow::new("Pole-Vault", 40, 711),
    TableRow::new("Polo", 31, 607),
    TableRow::new("Rowing", 32, 593),
    TableRow::new("Rugby", 35, 657),
    TableRow::new("Sailing", 33, 634),
    TableRow::new("Shooting-Rifle", 32, 592),
    TableRow::new("Skateboarding", 33, 644),
    TableRow::new("Skating", 35, 661),
    TableRow::new("Skiing", 33, 638),
    TableRow::new("Snooker", 32, 591),
    TableRow::new("Sprint-Run", 35, 662),
    TableRow::new("Surfing", 33, 629),
    TableRow::new("Swimming", 33, 640),
    TableRow::new("Table-Tennis", 33, 628),
    TableRow::new("Tennis", 36, 701),
    TableRow::new("UFC", 36, 692),
    TableRow::new("Volleyball", 35, 665),
    TableRow::new("Wall-Climbing", 35, 653),
    TableRow::new("Waterpolo", 33, 634),
    TableRow::new("Weight-Lifting", 33, 631),
    TableRow::new("Wrestling", 33, 646),
    TableRow::new("WWE", 34, 617),
];

/// Dataset size stated alongside the table.
pub const WOMENSPORTS_IMAGES: usize = 33_504;
/// Training-set size stated in the text and the split-distribution table.
/// The per-class train column sums to 1675.
pub const WOMENSPORTS_STATED_TRAIN: usize = 1676;
pub const WOMENSPORTS_STATED_TEST_90: usize = 30_152;

/// Built-in count tables addressable by name.
pub fn count_table(name: &str) -> Option<&'static [TableRow]> {
    match name.to_ascii_lowercase().as_str() {
        "womensports" | "women-sports" | "women_sports" => Some(&WOMENSPORTS),
        _ => None,
    }
}

pub fn train_counts(rows: &[TableRow]) -> BTreeMap<String, usize> {
    rows.iter().map(|r| (r.class_name.to_string(), r.train)).collect()
}

pub fn class_sizes(rows: &[TableRow]) -> BTreeMap<String, usize> {
    rows.iter().map(|r| (r.class_name.to_string(), r.total())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_totals() {
        assert_eq!(WOMENSPORTS.iter().map(TableRow::total).sum::<usize>(), WOMENSPORTS_IMAGES);
        assert_eq!(WOMENSPORTS.iter().map(|r| r.train).sum::<usize>(), 1675);
        let archery = WOMENSPORTS[0];
        assert_eq!((archery.class_name, archery.train, archery.test), ("Archery", 30, 574));
        let names: std::collections::BTreeSet<_> = WOMENSPORTS.iter().map(|r| r.class_name).collect();
        assert_eq!(names.len(), 50);
    }
}
