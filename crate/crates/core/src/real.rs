//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftPlanner;

/// In-place 1D transform of a single line, with caller-provided scratch.
pub type LineTransform<T> = Arc<dyn Fn(&mut [Complex<T>], &mut [Complex<T>]) + Send + Sync>;

/// Floating point scalar the solvers are generic over.
///
/// Implemented for `f32` and `f64`. The FFT backend is reached through
/// [`Real::line_transform`] so that generic code only sees `num_traits::Float`
/// methods and never trips over duplicate `abs`/`signum` candidates.
pub trait Real:
    Float + FloatConst + NumAssign + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Machine epsilon as an `f64`, used when deriving rounding floors.
    const EPS: f64;

    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Plan an unnormalized FFT of length `len` (`inverse` selects e^{+ikx}).
    fn line_transform(len: usize, inverse: bool) -> (LineTransform<Self>, usize);
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPS: f64 = <$t>::EPSILON as f64;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn line_transform(len: usize, inverse: bool) -> (LineTransform<Self>, usize) {
                let mut planner = FftPlanner::<$t>::new();
                let plan = if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                };
                let scratch = plan.get_inplace_scratch_len();
                let f: LineTransform<$t> =
                    Arc::new(move |buf, scratch| plan.process_with_scratch(buf, scratch));
                (f, scratch)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Shorthand for a complex number from real literals.
#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}
