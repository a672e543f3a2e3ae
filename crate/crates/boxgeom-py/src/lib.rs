//! Python bindings for the boxgeom toolkit: the projected 3D bounding box,
//! its construction from silhouettes and directions, the direction-bin
//! codec, and image unpacking.

use boxgeom::box3d::{self, CameraCalib, DirectionTriplet, TravelDirection};
use boxgeom::estimate;
use boxgeom::geom::{convex_hull, Point2, Rect};
use boxgeom::rast;
use boxgeom::unpack;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: boxgeom::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type ViewTuple = ((f64, f64), (f64, f64), (f64, f64), u8);
type MaskRows = Vec<Vec<(u8, u8, u8, u8)>>;

fn to_points(pts: &[(f64, f64)]) -> Vec<Point2> {
    pts.iter().map(|&(x, y)| Point2::new(x, y)).collect()
}

/// Projected 3D bounding box: eight vertices b0..b7 plus the travel flag d.
#[pyclass(name = "Box3D", from_py_object)]
#[derive(Clone)]
struct PyBox3D {
    inner: box3d::Box3D,
}

#[pymethods]
impl PyBox3D {
    #[new]
    fn new(vertices: Vec<(f64, f64)>, d: u8) -> PyResult<Self> {
        if vertices.len() != 8 {
            return Err(PyValueError::new_err(format!(
                "expected 8 vertices, got {}",
                vertices.len()
            )));
        }
        let mut b = [Point2::new(0.0, 0.0); 8];
        for (i, &(x, y)) in vertices.iter().enumerate() {
            b[i] = Point2::new(x, y);
        }
        let dir = TravelDirection::from_flag(d).map_err(err)?;
        Ok(Self {
            inner: box3d::Box3D::new(b, dir).map_err(err)?,
        })
    }

    /// The eight projected vertices as (x, y) pairs in b0..b7 order.
    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn d(&self) -> u8 {
        self.inner.direction().flag()
    }

    /// Intersection of the diagonals b2b4 and b5b3.
    fn center(&self) -> PyResult<(f64, f64)> {
        let c = box3d::box_center(&self.inner).map_err(err)?;
        Ok((c.x, c.y))
    }

    /// Unit view vectors (v_f, v_s, v_r) plus the d flag.
    fn view_vectors(&self) -> PyResult<ViewTuple> {
        let v = box3d::view_vectors(&self.inner).map_err(err)?;
        Ok((
            (v.v_f[0], v.v_f[1]),
            (v.v_s[0], v.v_s[1]),
            (v.v_r[0], v.v_r[1]),
            v.d,
        ))
    }

    /// Rasterized face mask cropped by bbox (x, y, w, h): rows of per-pixel
    /// 4-channel tuples in (front, rear, side, roof) order.
    fn rasterize(
        &self,
        bbox: (f64, f64, f64, f64),
        out_w: u32,
        out_h: u32,
    ) -> PyResult<MaskRows> {
        let mask = rast::rasterize(
            &self.inner,
            Rect::new(bbox.0, bbox.1, bbox.2, bbox.3),
            out_w,
            out_h,
        )
        .map_err(err)?;
        let mut rows = Vec::with_capacity(out_h as usize);
        for y in 0..out_h {
            let mut row = Vec::with_capacity(out_w as usize);
            for x in 0..out_w {
                let c = mask.channels(x, y);
                row.push((c[0], c[1], c[2], c[3]));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Axis-aligned bounding rectangle (x, y, w, h) of the vertices.
    fn bounding_rect(&self) -> (f64, f64, f64, f64) {
        let r = self.inner.bounding_rect();
        (r.x, r.y, r.w, r.h)
    }

    /// Camera-frame unit ray toward the vehicle through a pinhole with the
    /// given principal point and focal length.
    fn viewpoint_3d(&self, px: f64, py: f64, focal: f64) -> PyResult<(f64, f64, f64)> {
        let calib = CameraCalib::new(Point2::new(px, py), focal).map_err(err)?;
        let w = box3d::viewpoint_3d(&self.inner, &calib).map_err(err)?;
        Ok((w[0], w[1], w[2]))
    }

    fn __repr__(&self) -> String {
        format!(
            "Box3D(d={}, vertices={:?})",
            self.inner.direction().flag(),
            self.vertices()
        )
    }
}

/// Constructs the box from silhouette points (hulled internally) and the
/// three direction vectors toward the vanishing points.
#[pyfunction]
fn construct_box(
    silhouette: Vec<(f64, f64)>,
    dirs: ((f64, f64), (f64, f64), (f64, f64)),
    d: u8,
) -> PyResult<PyBox3D> {
    let hull = convex_hull(&to_points(&silhouette)).map_err(err)?;
    let triplet = DirectionTriplet::new(
        Point2::new(dirs.0 .0, dirs.0 .1),
        Point2::new(dirs.1 .0, dirs.1 .1),
        Point2::new(dirs.2 .0, dirs.2 .1),
    )
    .map_err(err)?;
    let dir = TravelDirection::from_flag(d).map_err(err)?;
    Ok(PyBox3D {
        inner: box3d::construct_box(&hull, &triplet, dir).map_err(err)?,
    })
}

/// Bin index of a direction angle in degrees, bins of 3° over [-90, 90).
#[pyfunction]
fn encode_angle(theta_deg: f64) -> PyResult<usize> {
    estimate::encode_angle(theta_deg).map_err(err)
}

/// Decodes a 60-bin probability row into an angle in degrees.
#[pyfunction]
fn decode_bins(row: Vec<f64>) -> PyResult<f64> {
    if row.len() != estimate::NUM_BINS {
        return Err(PyValueError::new_err(format!(
            "expected {} bins, got {}",
            estimate::NUM_BINS,
            row.len()
        )));
    }
    Ok(estimate::decode_bins(&row))
}

/// Focal length from two orthogonal finite vanishing points.
#[pyfunction]
fn focal_from_vps(
    u: (f64, f64),
    v: (f64, f64),
    principal: (f64, f64),
) -> PyResult<f64> {
    box3d::focal_from_vps(
        Point2::new(u.0, u.1),
        Point2::new(v.0, v.1),
        Point2::new(principal.0, principal.1),
    )
    .map_err(err)
}

/// Direction angles (degrees in [-90, 90)) of three vanishing points as seen
/// from the center of bbox (x, y, w, h).
#[pyfunction]
fn gt_directions(
    vps: ((f64, f64), (f64, f64), (f64, f64)),
    bbox: (f64, f64, f64, f64),
) -> PyResult<(f64, f64, f64)> {
    let t = estimate::gt_directions(
        estimate::GtSource::VanishingPoints([
            Point2::new(vps.0 .0, vps.0 .1),
            Point2::new(vps.1 .0, vps.1 .1),
            Point2::new(vps.2 .0, vps.2 .1),
        ]),
        Rect::new(bbox.0, bbox.1, bbox.2, bbox.3),
    )
    .map_err(err)?;
    Ok((t.theta_f, t.theta_s, t.theta_r))
}

/// Unpacks the box faces of the image at `image_path` into a normalized
/// `target` x `target` plane written to `out_path`. Returns the block layout
/// (w_f, w_s, h_r, h_s).
#[pyfunction]
fn unpack_image(
    image_path: &str,
    box3d: &PyBox3D,
    target: u32,
    out_path: &str,
) -> PyResult<(u32, u32, u32, u32)> {
    let img = image::open(image_path)
        .map_err(|e| PyValueError::new_err(e.to_string()))?
        .to_rgb8();
    let layout = unpack::layout_from_box(&box3d.inner, target).map_err(err)?;
    let unpacked = unpack::unpack(&img, &box3d.inner, &layout).map_err(err)?;
    unpacked
        .pixels
        .save(out_path)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((layout.w_f, layout.w_s, layout.h_r, layout.h_s))
}

#[pymodule]
fn boxgeom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBox3D>()?;
    m.add_function(wrap_pyfunction!(construct_box, m)?)?;
    m.add_function(wrap_pyfunction!(encode_angle, m)?)?;
    m.add_function(wrap_pyfunction!(decode_bins, m)?)?;
    m.add_function(wrap_pyfunction!(focal_from_vps, m)?)?;
    m.add_function(wrap_pyfunction!(gt_directions, m)?)?;
    m.add_function(wrap_pyfunction!(unpack_image, m)?)?;
    m.add("NUM_BINS", estimate::NUM_BINS)?;
    Ok(())
}
