use crate::error::{Error, Result};

/// Row-per-draw matrix of function values at fixed evaluation points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DrawMatrix {
    points: usize,
    values: Vec<f64>,
}

impl DrawMatrix {
    pub fn new(points: usize) -> Self {
        Self {
            points,
            values: Vec::new(),
        }
    }

    pub fn from_rows(points: usize, values: Vec<f64>) -> Result<Self> {
        if points == 0 && !values.is_empty() || points > 0 && !values.len().is_multiple_of(points) {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of {points} points",
                values.len()
            )));
        }
        Ok(Self { points, values })
    }

    pub fn push(&mut self, draw: &[f64]) {
        assert_eq!(
            draw.len(),
            self.points,
            "draw has the wrong number of points"
        );
        self.values.extend_from_slice(draw);
    }

    pub fn n_points(&self) -> usize {
        self.points
    }

    pub fn n_draws(&self) -> usize {
        self.values.len().checked_div(self.points).unwrap_or(0)
    }

    pub fn draw(&self, s: usize) -> &[f64] {
        &self.values[s * self.points..(s + 1) * self.points]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Draws at point `j`, in draw order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(j)
            .step_by(self.points)
            .copied()
            .collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.points).map(|j| self.column(j)).collect()
    }

    pub fn point_means(&self) -> Vec<f64> {
        let s = self.n_draws() as f64;
        let mut out = vec![0.0; self.points];
        for d in self.values.chunks_exact(self.points.max(1)) {
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= s);
        out
    }

    /// Unbiased sample variance at each point.
    pub fn point_variances(&self) -> Vec<f64> {
        let means = self.point_means();
        let s = self.n_draws();
        let mut out = vec![0.0; self.points];
        for d in self.values.chunks_exact(self.points.max(1)) {
            for ((o, v), m) in out.iter_mut().zip(d).zip(&means) {
                *o += (v - m) * (v - m);
            }
        }
        out.iter_mut().for_each(|o| *o /= (s.max(2) - 1) as f64);
        out
    }

    /// Stacks the draws of `parts` one after another.
    pub fn concat(parts: &[&DrawMatrix]) -> Result<Self> {
        let points = parts.first().map_or(0, |p| p.points);
        if parts.iter().any(|p| p.points != points) {
            return Err(Error::Alignment(
                "draw matrices cover different evaluation points".into(),
            ));
        }
        let values = parts
            .iter()
            .flat_map(|p| p.values.iter().copied())
            .collect();
        Ok(Self { points, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut m = DrawMatrix::new(2);
        m.push(&[1.0, 10.0]);
        m.push(&[3.0, 20.0]);
        assert_eq!(m.n_draws(), 2);
        assert_eq!(m.column(1), vec![10.0, 20.0]);
        assert_eq!(m.point_means(), vec![2.0, 15.0]);
        assert_eq!(m.point_variances(), vec![2.0, 50.0]);
        let c = DrawMatrix::concat(&[&m, &m]).unwrap();
        assert_eq!(c.n_draws(), 4);
        assert!(DrawMatrix::concat(&[&m, &DrawMatrix::new(3)]).is_err());
        assert!(DrawMatrix::from_rows(2, vec![1.0; 3]).is_err());
    }
}
