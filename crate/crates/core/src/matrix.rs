//! Dense row-major matrices, the two transpose task formulations, and the
//! slab split/concatenate helpers used around collectives.

use std::cell::UnsafeCell;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dist::LocalityId;
use crate::error::{FftError, Result};
use crate::kernel::ComplexSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatrixExtents {
    rows: usize,
    cols: usize,
}

impl MatrixExtents {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 {
            return Err(FftError::InvalidSize {
                value: rows,
                reason: "matrix must have at least one row",
            });
        }
        if cols == 0 {
            return Err(FftError::InvalidSize {
                value: cols,
                reason: "matrix must have at least one column",
            });
        }
        Ok(MatrixExtents { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transposed(&self) -> Self {
        MatrixExtents {
            rows: self.cols,
            cols: self.rows,
        }
    }

    /// Both extents must be powers of two and at least 2 for the 2D pipeline.
    pub fn require_fft_extents(&self) -> Result<()> {
        for value in [self.rows, self.cols] {
            if value < 2 || !value.is_power_of_two() {
                return Err(FftError::InvalidSize {
                    value,
                    reason: "2D FFT extents must be powers of two and at least 2",
                });
            }
        }
        Ok(())
    }

    /// Extents of the r2c spectrum, `rows x (cols/2 + 1)`.
    pub fn spectrum(&self) -> Self {
        MatrixExtents {
            rows: self.rows,
            cols: self.cols / 2 + 1,
        }
    }
}

impl fmt::Display for MatrixExtents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    extents: MatrixExtents,
    data: Vec<T>,
}

pub type SignalMatrix = Matrix<f64>;
pub type SpectrumMatrix = Matrix<ComplexSample>;

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(extents: MatrixExtents) -> Self {
        Matrix {
            extents,
            data: vec![T::default(); extents.len()],
        }
    }
}

impl<T: Copy> Matrix<T> {
    pub fn from_vec(extents: MatrixExtents, data: Vec<T>) -> Result<Self> {
        if data.len() != extents.len() {
            return Err(FftError::shape(
                format!("{} elements for {extents}", extents.len()),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Matrix { extents, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let extents = MatrixExtents::new(rows.len(), cols)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(FftError::shape(
                format!("{cols} columns"),
                format!("{} columns", bad.len()),
            ));
        }
        Matrix::from_vec(extents, rows.concat())
    }

    pub fn extents(&self) -> MatrixExtents {
        self.extents
    }

    pub fn rows(&self) -> usize {
        self.extents.rows
    }

    pub fn cols(&self) -> usize {
        self.extents.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.extents.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let cols = self.extents.cols;
        &self.data[row * cols..(row + 1) * cols]
    }

    pub fn row_block(&self, rows: Range<usize>) -> &[T] {
        let cols = self.extents.cols;
        &self.data[rows.start * cols..rows.end * cols]
    }
}

/// Bit-level equality for matrices of floats. `PartialEq` would treat
/// `0.0 == -0.0` and `NaN != NaN`; strategy agreement is checked on bits.
pub trait BitwiseEq {
    fn bitwise_eq(&self, other: &Self) -> bool;
}

impl BitwiseEq for SignalMatrix {
    fn bitwise_eq(&self, other: &Self) -> bool {
        self.extents == other.extents
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl BitwiseEq for SpectrumMatrix {
    fn bitwise_eq(&self, other: &Self) -> bool {
        self.extents == other.extents
            && self.data.iter().zip(&other.data).all(|(a, b)| {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            })
    }
}

/// Destination of transpose writes, addressed by flat row-major index into
/// the full destination matrix.
pub trait ElementSink<T> {
    fn put(&mut self, index: usize, value: T);
}

impl<T> ElementSink<T> for [T] {
    #[inline]
    fn put(&mut self, index: usize, value: T) {
        self[index] = value;
    }
}

/// A contiguous block of destination rows starting at flat index `offset`.
pub struct BlockSink<'a, T> {
    block: &'a mut [T],
    offset: usize,
}

impl<'a, T> BlockSink<'a, T> {
    pub fn new(block: &'a mut [T], offset: usize) -> Self {
        BlockSink { block, offset }
    }
}

impl<T> ElementSink<T> for BlockSink<'_, T> {
    #[inline]
    fn put(&mut self, index: usize, value: T) {
        self.block[index - self.offset] = value;
    }
}

/// Read-contiguous transpose task: streams the source rows in `task_rows`
/// (given as `src_block`, those rows only) and scatters each into column
/// `r` of the destination.
pub fn transpose_read_rows<T, S>(
    src_block: &[T],
    src_extents: MatrixExtents,
    task_rows: Range<usize>,
    dst: &mut S,
) where
    T: Copy,
    S: ElementSink<T> + ?Sized,
{
    let (n, m) = (src_extents.rows, src_extents.cols);
    debug_assert_eq!(src_block.len(), task_rows.len() * m);
    for (row, values) in task_rows.zip(src_block.chunks_exact(m)) {
        for (col, &v) in values.iter().enumerate() {
            dst.put(col * n + row, v);
        }
    }
}

/// Write-contiguous transpose task: fills destination rows `task_rows`
/// completely, gathering each from a source column. Needs the whole source.
pub fn transpose_write_rows<T, S>(
    src: &[T],
    src_extents: MatrixExtents,
    task_rows: Range<usize>,
    dst: &mut S,
) where
    T: Copy,
    S: ElementSink<T> + ?Sized,
{
    let (n, m) = (src_extents.rows, src_extents.cols);
    debug_assert_eq!(src.len(), n * m);
    for row in task_rows {
        let base = row * n;
        for col in 0..n {
            dst.put(base + col, src[col * m + row]);
        }
    }
}

fn check_transpose_extents<T>(src: &Matrix<T>, dst: &Matrix<T>) -> Result<()> {
    if dst.extents != src.extents.transposed() {
        return Err(FftError::shape(
            format!("destination {}", src.extents.transposed()),
            format!("destination {}", dst.extents),
        ));
    }
    Ok(())
}

fn check_interval(rows: &Range<usize>, len: usize) -> Result<()> {
    if rows.start > rows.end || rows.end > len {
        return Err(FftError::Bounds {
            start: rows.start,
            end: rows.end,
            len,
        });
    }
    Ok(())
}

/// `dst[c][r] = src[r][c]` for every `r` in `task_rows` (rows of `src`).
pub fn transpose_read_contiguous<T: Copy>(
    src: &Matrix<T>,
    dst: &mut Matrix<T>,
    task_rows: Range<usize>,
) -> Result<()> {
    check_transpose_extents(src, dst)?;
    check_interval(&task_rows, src.rows())?;
    let block = src.row_block(task_rows.clone());
    transpose_read_rows(block, src.extents, task_rows, dst.data.as_mut_slice());
    Ok(())
}

/// `dst[r][c] = src[c][r]` for every `r` in `task_rows` (rows of `dst`).
pub fn transpose_write_contiguous<T: Copy>(
    src: &Matrix<T>,
    dst: &mut Matrix<T>,
    task_rows: Range<usize>,
) -> Result<()> {
    check_transpose_extents(src, dst)?;
    check_interval(&task_rows, dst.rows())?;
    transpose_write_rows(&src.data, src.extents, task_rows, dst.data.as_mut_slice());
    Ok(())
}

/// Full out-of-place transpose.
pub fn transpose<T: Copy + Default>(src: &Matrix<T>) -> Matrix<T> {
    let mut dst = Matrix::zeros(src.extents.transposed());
    transpose_write_rows(&src.data, src.extents, 0..dst.rows(), dst.data.as_mut_slice());
    dst
}

/// Contiguous row range owned by one locality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlabPartition {
    pub locality: LocalityId,
    pub row_range: Range<usize>,
}

impl SlabPartition {
    pub fn for_rows(rows: usize, n_locs: usize) -> Result<Vec<SlabPartition>> {
        if n_locs == 0 || !rows.is_multiple_of(n_locs) {
            return Err(FftError::Partition { rows, n_locs });
        }
        let per = rows / n_locs;
        Ok((0..n_locs)
            .map(|rank| SlabPartition {
                locality: LocalityId(rank),
                row_range: rank * per..(rank + 1) * per,
            })
            .collect())
    }
}

pub fn split_into_slabs<T: Copy>(m: &Matrix<T>, n_locs: usize) -> Result<Vec<Matrix<T>>> {
    SlabPartition::for_rows(m.rows(), n_locs)?
        .into_iter()
        .map(|p| {
            let extents = MatrixExtents::new(p.row_range.len(), m.cols())?;
            Matrix::from_vec(extents, m.row_block(p.row_range).to_vec())
        })
        .collect()
}

pub fn concatenate_slabs<T: Copy>(parts: &[Matrix<T>]) -> Result<Matrix<T>> {
    let first = parts.first().ok_or_else(|| FftError::shape("at least one part", "none"))?;
    let cols = first.cols();
    if let Some(bad) = parts.iter().find(|p| p.cols() != cols) {
        return Err(FftError::shape(
            format!("parts with {cols} columns"),
            format!("a part with {} columns", bad.cols()),
        ));
    }
    let rows = parts.iter().map(Matrix::rows).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        data.extend_from_slice(&p.data);
    }
    Matrix::from_vec(MatrixExtents::new(rows, cols)?, data)
}

/// Contiguous column ranges for `parts` receivers. Widths differ by at most
/// one; the first `cols % parts` ranges take the extra column.
pub fn column_partition(cols: usize, parts: usize) -> Result<Vec<Range<usize>>> {
    if parts == 0 || cols < parts {
        return Err(FftError::Partition {
            rows: cols,
            n_locs: parts,
        });
    }
    let (base, extra) = (cols / parts, cols % parts);
    let mut start = 0;
    Ok((0..parts)
        .map(|j| {
            let width = base + usize::from(j < extra);
            let range = start..start + width;
            start += width;
            range
        })
        .collect())
}

/// Cuts `m` into column blocks, one per range, each keeping every row.
pub fn split_column_blocks<T: Copy>(
    m: &Matrix<T>,
    ranges: &[Range<usize>],
) -> Result<Vec<Matrix<T>>> {
    ranges
        .iter()
        .map(|range| {
            check_interval(range, m.cols())?;
            let extents = MatrixExtents::new(m.rows(), range.len())?;
            let mut data = Vec::with_capacity(extents.len());
            for r in 0..m.rows() {
                data.extend_from_slice(&m.row(r)[range.clone()]);
            }
            Matrix::from_vec(extents, data)
        })
        .collect()
}

/// Matrix storage written concurrently by tasks that own disjoint element
/// sets. All access is `unsafe`; callers guarantee disjointness and that
/// reads only touch elements whose writers have completed.
pub struct SharedMatrix<T> {
    extents: MatrixExtents,
    data: UnsafeCell<Vec<T>>,
}

// SAFETY: the accessors are unsafe and require disjoint, ordered access.
unsafe impl<T: Send> Sync for SharedMatrix<T> {}

impl<T: Copy> SharedMatrix<T> {
    pub fn new(m: Matrix<T>) -> Self {
        SharedMatrix {
            extents: m.extents,
            data: UnsafeCell::new(m.data),
        }
    }

    pub fn extents(&self) -> MatrixExtents {
        self.extents
    }

    pub fn into_inner(self) -> Matrix<T> {
        Matrix {
            extents: self.extents,
            data: self.data.into_inner(),
        }
    }

    fn base(&self) -> *mut T {
        // SAFETY: only the pointer is taken; the Vec is never resized.
        unsafe { (*self.data.get()).as_mut_ptr() }
    }

    /// # Safety
    /// No task may be writing any element of `rows` during the borrow.
    pub unsafe fn rows(&self, rows: Range<usize>) -> &[T] {
        let cols = self.extents.cols;
        assert!(rows.start <= rows.end && rows.end <= self.extents.rows);
        std::slice::from_raw_parts(self.base().add(rows.start * cols), rows.len() * cols)
    }

    /// # Safety
    /// The caller must be the only accessor of `rows` during the borrow.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn rows_mut(&self, rows: Range<usize>) -> &mut [T] {
        let cols = self.extents.cols;
        assert!(rows.start <= rows.end && rows.end <= self.extents.rows);
        std::slice::from_raw_parts_mut(self.base().add(rows.start * cols), rows.len() * cols)
    }

    /// # Safety
    /// The caller must be the only writer of every element it will `put`.
    pub unsafe fn writer(&self) -> SharedWriter<'_, T> {
        SharedWriter {
            base: self.base(),
            len: self.extents.len(),
            _owner: std::marker::PhantomData,
        }
    }
}

/// Scattered-write handle onto a [`SharedMatrix`].
pub struct SharedWriter<'a, T> {
    base: *mut T,
    len: usize,
    _owner: std::marker::PhantomData<&'a SharedMatrix<T>>,
}

impl<T> ElementSink<T> for SharedWriter<'_, T> {
    #[inline]
    fn put(&mut self, index: usize, value: T) {
        assert!(index < self.len);
        // SAFETY: in bounds; exclusivity promised when the writer was created.
        unsafe { self.base.add(index).write(value) }
    }
}
