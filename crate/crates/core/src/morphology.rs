//! Binary morphology on row-major bit grids with a square structuring
//! element. The window is clipped at the image border, so dilation treats
//! outside pixels as background and erosion ignores them.

fn window_counts(line: &[bool], radius: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = line.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &b in line {
        prefix.push(prefix.last().unwrap() + usize::from(b));
    }
    (0..n).map(move |i| {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(n);
        (prefix[hi] - prefix[lo], hi - lo)
    })
}

fn pass(bits: &[bool], width: usize, height: usize, radius: usize, dilate: bool, horizontal: bool) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    let (lines, len) = if horizontal { (height, width) } else { (width, height) };
    let index = |line: usize, k: usize| if horizontal { line * width + k } else { k * width + line };
    let mut buf = vec![false; len];
    for line in 0..lines {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = bits[index(line, k)];
        }
        for (k, (count, span)) in window_counts(&buf, radius).enumerate() {
            out[index(line, k)] = if dilate { count > 0 } else { count == span };
        }
    }
    out
}

pub fn dilate(bits: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let h = pass(bits, width, height, radius, true, true);
    pass(&h, width, height, radius, true, false)
}

pub fn erode(bits: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let h = pass(bits, width, height, radius, false, true);
    pass(&h, width, height, radius, false, false)
}

/// Positive radius dilates, negative erodes.
pub fn morph(bits: &[bool], width: usize, height: usize, radius: i32) -> Vec<bool> {
    match radius {
        r if r > 0 => dilate(bits, width, height, r as usize),
        r if r < 0 => erode(bits, width, height, r.unsigned_abs() as usize),
        _ => bits.to_vec(),
    }
}

/// Pixels with a 4-neighbour of the opposite value (both sides of the edge).
pub fn boundary(bits: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    for y in 0..height {
        for x in 0..width {
            let v = bits[y * width + x];
            let differs = (x > 0 && bits[y * width + x - 1] != v)
                || (x + 1 < width && bits[y * width + x + 1] != v)
                || (y > 0 && bits[(y - 1) * width + x] != v)
                || (y + 1 < height && bits[(y + 1) * width + x] != v);
            out[y * width + x] = differs;
        }
    }
    out
}
