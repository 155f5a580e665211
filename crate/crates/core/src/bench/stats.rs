use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::dataset::TaskRecord;

/// Histogram bucket over relative target area, in percent of the screenshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBucket {
    /// Inclusive lower bound, percent.
    pub lower_pct: f64,
    /// Exclusive upper bound, percent (the last bucket includes 100).
    pub upper_pct: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub count: usize,
    pub mean_pct: f64,
    pub median_pct: f64,
    pub histogram: Vec<SizeBucket>,
}

/// Exact ground-truth area over screenshot area.
pub fn relative_area(task: &TaskRecord) -> Ratio<u128> {
    let b = &task.bbox;
    let gt = (b.width() as u128) * (b.height() as u128);
    let img = task.img_size[0] as u128 * task.img_size[1] as u128;
    Ratio::new(gt, img.max(1))
}

fn pct(r: Ratio<u128>) -> f64 {
    (r * Ratio::from_integer(100u128)).to_f64().unwrap_or(f64::NAN)
}

// Decade bucket boundaries in percent: 1e-4 % up to 100 %.
const DECADES: [f64; 7] = [0.0001, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

/// Mean, median and a log-decade histogram of relative target size.
pub fn target_size_stats(tasks: &[TaskRecord]) -> SizeStats {
    let mut areas: Vec<Ratio<u128>> = tasks.iter().map(relative_area).collect();
    areas.sort();
    let n = areas.len();
    let (mean, median) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let sum = areas.iter().fold(Ratio::from_integer(0u128), |a, b| a + b);
        let mean = sum / Ratio::from_integer(n as u128);
        let median = if n % 2 == 1 {
            areas[n / 2]
        } else {
            (areas[n / 2 - 1] + areas[n / 2]) / Ratio::from_integer(2u128)
        };
        (pct(mean), pct(median))
    };
    let mut histogram: Vec<SizeBucket> = Vec::new();
    histogram.push(SizeBucket {
        lower_pct: 0.0,
        upper_pct: DECADES[0],
        count: 0,
    });
    for w in DECADES.windows(2) {
        histogram.push(SizeBucket {
            lower_pct: w[0],
            upper_pct: w[1],
            count: 0,
        });
    }
    let last = histogram.len() - 1;
    for a in &areas {
        let p = pct(*a);
        let i = histogram
            .iter()
            .position(|b| p < b.upper_pct)
            .unwrap_or(last);
        histogram[i].count += 1;
    }
    SizeStats {
        count: n,
        mean_pct: mean,
        median_pct: median,
        histogram,
    }
}
