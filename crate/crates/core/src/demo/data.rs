//! Synthetic demo datasets, generated deterministically from fixed seeds.

use std::fmt::Write as _;

use crate::dataset::SplitMix64;

pub const HOUSING_ROWS: usize = 400;
pub const HOUSING_COLUMNS: [&str; 7] = [
    "sqft",
    "bedrooms",
    "age_years",
    "distance_km",
    "lot_sqft",
    "quality",
    "price",
];

/// Price in thousands. Dominated by step effects, so axis-aligned trees fit
/// it far better than a linear model.
pub fn housing_price(sqft: f64, age: f64, distance: f64, quality: f64) -> f64 {
    let mut price = 60.0 + 0.03 * sqft;
    if quality >= 7.0 {
        price += 180.0;
    }
    if distance < 8.0 {
        price += 110.0;
    }
    if age < 20.0 {
        price += 70.0;
    }
    price
}

/// Header plus 400 rows; the label column is `price`.
pub fn housing_csv() -> String {
    let mut rng = SplitMix64::new(0x486f_7573_696e_6721);
    let mut out = HOUSING_COLUMNS.join(",");
    out.push('\n');
    for _ in 0..HOUSING_ROWS {
        let sqft = (500.0 + rng.next_f64() * 3000.0).round();
        let bedrooms = 1 + rng.below(5);
        let age = (rng.next_f64() * 80.0).round();
        let distance = ((0.5 + rng.next_f64() * 29.5) * 10.0).round() / 10.0;
        let lot = (1000.0 + rng.next_f64() * 19000.0).round();
        let quality = 1 + rng.below(10);
        let noise = rng.next_normal() * 8.0;
        let price = housing_price(sqft, age, distance, quality as f64) + noise;
        let price = (price * 100.0).round() / 100.0;
        writeln!(out, "{sqft},{bedrooms},{age},{distance},{lot},{quality},{price}").unwrap();
    }
    out
}

pub const DIGIT_SIDE: usize = 8;
pub const DIGITS_PER_CLASS: usize = 60;

const GLYPHS: [[&str; 8]; 10] = [
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..",
    ],
    [
        "...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####..",
    ],
    [
        "..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######.",
    ],
    [
        "..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####..",
    ],
    [
        ".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", ".....#..",
    ],
    [
        ".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####..",
    ],
    [
        "...###..", "..#.....", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####..",
    ],
    [
        ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#....",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####..",
    ],
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", "..#####.", "......#.", ".....#..", "..###...",
    ],
];

/// 600 noisy, jittered 8x8 glyphs with pixel values 0..=16 and a trailing
/// `digit` label column; rows are interleaved by class.
pub fn digits_csv() -> String {
    let mut rng = SplitMix64::new(0x4469_6769_7473_3838);
    let mut out: String = (0..DIGIT_SIDE * DIGIT_SIDE)
        .map(|i| format!("px{i},"))
        .collect();
    out.push_str("digit\n");
    for _ in 0..DIGITS_PER_CLASS {
        for (digit, glyph) in GLYPHS.iter().enumerate() {
            let dy = rng.below(3) as i64 - 1;
            let dx = rng.below(3) as i64 - 1;
            let ink = 10.0 + rng.next_f64() * 6.0;
            for r in 0..DIGIT_SIDE as i64 {
                for c in 0..DIGIT_SIDE as i64 {
                    let (sr, sc) = (r - dy, c - dx);
                    let on = (0..DIGIT_SIDE as i64).contains(&sr)
                        && (0..DIGIT_SIDE as i64).contains(&sc)
                        && glyph[sr as usize].as_bytes()[sc as usize] == b'#';
                    let base = if on { ink } else { 0.0 };
                    let v = (base + rng.next_normal() * 2.5).round().clamp(0.0, 16.0) + 0.0;
                    write!(out, "{v},").unwrap();
                }
            }
            writeln!(out, "{digit}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn housing_shape() {
        let text = housing_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), HOUSING_ROWS + 1);
        assert!(lines.iter().all(|l| l.split(',').count() == 7));
        assert_eq!(housing_csv(), text);
    }

    #[test]
    fn digits_shape() {
        let text = digits_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10 * DIGITS_PER_CLASS + 1);
        assert!(lines.iter().all(|l| l.split(',').count() == 65));
        for l in &lines[1..] {
            for v in l.split(',').take(64) {
                let v: f64 = v.parse().unwrap();
                assert!((0.0..=16.0).contains(&v));
            }
        }
    }
}
