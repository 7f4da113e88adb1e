//! Shared test oracles: independent reference implementations that the
//! production code is checked against. Everything here recomputes results
//! from first principles and stays off the production evaluation paths.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use tensorglm::Tensor;

fn advance(index: &mut [usize], shape: &[usize]) -> bool {
    for axis in (0..shape.len()).rev() {
        index[axis] += 1;
        if index[axis] < shape[axis] {
            return true;
        }
        index[axis] = 0;
    }
    false
}

/// Brute-force einsum: parses the spec text itself and evaluates the
/// contraction by enumerating full multi-indices, with the same summation
/// order convention as the production evaluator (output row-major outside,
/// summation labels row-major inside, summation labels ordered by first
/// appearance, products folded left to right). No plans, no strides.
pub fn naive_einsum(spec: &str, operands: &[&Tensor]) -> Tensor {
    let stripped: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let (lhs, rhs) = stripped.split_once("->").expect("oracle needs a valid spec");
    let subscripts: Vec<Vec<char>> = lhs.split(',').map(|s| s.chars().collect()).collect();
    let output: Vec<char> = rhs.chars().collect();
    assert_eq!(subscripts.len(), operands.len());

    let mut extents: Vec<(char, usize)> = Vec::new();
    for (subscript, operand) in subscripts.iter().zip(operands) {
        assert_eq!(subscript.len(), operand.rank());
        for (&label, &extent) in subscript.iter().zip(operand.shape()) {
            match extents.iter().find(|(known, _)| *known == label) {
                Some((_, bound)) => assert_eq!(*bound, extent),
                None => extents.push((label, extent)),
            }
        }
    }
    let extent_of = |label: char| -> usize {
        extents
            .iter()
            .find(|(known, _)| *known == label)
            .expect("label bound")
            .1
    };

    let mut summation: Vec<char> = Vec::new();
    for subscript in &subscripts {
        for &label in subscript {
            if !output.contains(&label) && !summation.contains(&label) {
                summation.push(label);
            }
        }
    }

    let out_shape: Vec<usize> = output.iter().map(|&c| extent_of(c)).collect();
    let sum_shape: Vec<usize> = summation.iter().map(|&c| extent_of(c)).collect();

    let mut data = Vec::new();
    let mut out_index = vec![0usize; out_shape.len()];
    loop {
        let mut acc = 0.0;
        let mut sum_index = vec![0usize; sum_shape.len()];
        loop {
            let lookup = |label: char| -> usize {
                if let Some(pos) = output.iter().position(|&c| c == label) {
                    out_index[pos]
                } else {
                    let pos = summation
                        .iter()
                        .position(|&c| c == label)
                        .expect("label classified");
                    sum_index[pos]
                }
            };
            let mut product = f64::NAN;
            for (i, (subscript, operand)) in subscripts.iter().zip(operands).enumerate() {
                let index: Vec<usize> = subscript.iter().map(|&c| lookup(c)).collect();
                let value = operand.get(&index);
                if i == 0 {
                    product = value;
                } else {
                    product *= value;
                }
            }
            acc += product;
            if !advance(&mut sum_index, &sum_shape) {
                break;
            }
        }
        data.push(acc);
        if !advance(&mut out_index, &out_shape) {
            break;
        }
    }
    Tensor::new(out_shape, data).expect("oracle output volume matches")
}

/// One random einsum case: a valid spec string plus matching operands,
/// with ranks up to 4 and extents up to 5. Subscripts may repeat labels
/// within an operand; the output is a shuffled subset of the used labels.
pub fn random_einsum_case(rng: &mut ChaCha12Rng) -> (String, Vec<Tensor>) {
    let pool = ['a', 'b', 'c', 'd', 'e'];
    let extents: Vec<usize> = (0..pool.len()).map(|_| rng.random_range(1..=5)).collect();
    let extent_of = |label: char| extents[pool.iter().position(|&c| c == label).unwrap()];

    let operand_count = rng.random_range(1..=3);
    let mut subscripts: Vec<Vec<char>> = Vec::with_capacity(operand_count);
    for _ in 0..operand_count {
        let rank = rng.random_range(0..=4);
        subscripts.push((0..rank).map(|_| pool[rng.random_range(0..pool.len())]).collect());
    }

    let mut used: Vec<char> = Vec::new();
    for subscript in &subscripts {
        for &label in subscript {
            if !used.contains(&label) {
                used.push(label);
            }
        }
    }
    let mut output: Vec<char> = used
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.5))
        .collect();
    output.shuffle(rng);

    let spec = format!(
        "{}->{}",
        subscripts
            .iter()
            .map(|s| s.iter().collect::<String>())
            .collect::<Vec<_>>()
            .join(","),
        output.iter().collect::<String>()
    );

    let operands: Vec<Tensor> = subscripts
        .iter()
        .map(|subscript| {
            let shape: Vec<usize> = subscript.iter().map(|&c| extent_of(c)).collect();
            let volume: usize = shape.iter().product();
            let data: Vec<f64> = (0..volume).map(|_| rng.random_range(-2.0..2.0)).collect();
            Tensor::new(shape, data).unwrap()
        })
        .collect();

    (spec, operands)
}

pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Textbook simple-regression slope t statistic for a single group:
/// `t = m / (sigma / sqrt(sum (x - mean_x)^2))` with the unbiased residual
/// variance on n - 2 degrees of freedom.
pub fn simple_regression_slope_t(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let sigma2 = rss / (n - 2.0);
    slope / (sigma2 / sxx).sqrt()
}

/// Two-sided Student-t p-value by Simpson integration of the density.
/// Only even degrees of freedom: the normalizing constant then reduces to
/// factorials, keeping this oracle free of any gamma-function code.
pub fn integrated_t_pvalue(t: f64, df: usize) -> f64 {
    assert!(df >= 2 && df % 2 == 0, "oracle handles even df only");
    let v = df as f64;
    let half = df / 2;
    // Gamma((v+1)/2) / Gamma(v/2) = (2n)! sqrt(pi) / (4^n n! (n-1)!)
    // for v = 2n, so the density constant is (2n)! / (4^n n! (n-1)! sqrt(v)).
    let factorial = |k: usize| -> f64 { (1..=k).product::<usize>() as f64 };
    let constant = factorial(2 * half)
        / (4.0_f64.powi(half as i32) * factorial(half) * factorial(half - 1) * v.sqrt());
    let density = |x: f64| constant * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0);

    // Simpson's rule on [0, |t|].
    let upper = t.abs();
    if upper == 0.0 {
        return 1.0;
    }
    let intervals = 200_000usize;
    let h = upper / intervals as f64;
    let mut sum = density(0.0) + density(upper);
    for i in 1..intervals {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * density(i as f64 * h);
    }
    let central = 2.0 * (h / 3.0) * sum;
    1.0 - central
}

/// Max entry deviation relative to the larger of 1 and the data scale.
pub fn scaled_deviation(a: &[f64], b: &[f64]) -> f64 {
    tensorglm::bench::max_relative_deviation(a, b)
}
