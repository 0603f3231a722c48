/// Links the system OpenBLAS (which bundles LAPACK and CBLAS on Debian
/// and friends) instead of pulling in a `*-src` crate that rebuilds BLAS
/// from source. `ndarray-linalg` is used with `default-features = false`,
/// so providing the LAPACK symbols at link time is this crate's job.
fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
}
