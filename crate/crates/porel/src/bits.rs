//! Dense square bit matrix used for cached order closures.

#[derive(Clone, PartialEq, Eq)]
pub(crate) struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitMatrix {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n && j < self.n);
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        debug_assert!(i < self.n && j < self.n);
        self.bits[i * self.words + j / 64] |= 1u64 << (j % 64);
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn or_row_into(&mut self, i: usize, other: &[u64]) {
        let row = &mut self.bits[i * self.words..(i + 1) * self.words];
        for (a, b) in row.iter_mut().zip(other) {
            *a |= *b;
        }
    }

    /// Reflexive-transitive closure is not wanted here: this closes the
    /// strict relation, leaving the diagonal untouched (a diagonal bit
    /// after closing witnesses a cycle).
    pub fn transitive_close(&mut self) {
        for k in 0..self.n {
            let row_k = self.row(k).to_vec();
            for i in 0..self.n {
                if self.get(i, k) {
                    self.or_row_into(i, &row_k);
                }
            }
        }
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::new(self.n);
        for i in 0..self.n {
            for j in self.iter_row(i) {
                t.set(j, i);
            }
        }
        t
    }

    pub fn count_row(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = self.row(i);
        row.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            let mut out = Vec::new();
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                w &= w - 1;
            }
            out
        })
    }

    pub fn rows_intersect(&self, i: usize, other: &BitMatrix, j: usize) -> bool {
        self.row(i).iter().zip(other.row(j)).any(|(a, b)| a & b != 0)
    }

    pub fn union_count(&self, i: usize, j: usize) -> usize {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix({})", self.n)?;
        for i in 0..self.n {
            for j in 0..self.n {
                write!(f, "{}", if self.get(i, j) { '1' } else { '.' })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
