//! Object detection: projected center, scale and depth.
//!
//! A coarse pass correlates pooled templates against a query pyramid and
//! fuses the maps by per-pixel max. A fine pass takes the best template,
//! resamples windows around the coarse hit at sub-level scales and picks
//! the peak, interpolating scale and position parabolically.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::correlation::{build_pyramid, correlate_all, parabolic_offset, Pyramid, ScoreMap};
use crate::database::ReferenceDatabase;
use crate::error::{Error, Result};
use crate::geometry::{box_size_from_scale, depth_from_scale, virtual_focal, Intrinsics, Vec2, Vec3};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub n_levels: usize,
    pub factor: f64,
    /// Pyramid level at which the query is at its own resolution. Levels
    /// below it are upsampled, so scales `factor^(level − native_level)`
    /// are searched.
    pub native_level: usize,
    /// Pooling stride of the coarse pass.
    pub coarse_stride: usize,
    /// Fine-pass scale samples per pyramid level.
    pub sub_steps: usize,
    pub min_score: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_levels: 5,
            factor: SQRT_2,
            native_level: 2,
            coarse_stride: 4,
            sub_steps: 4,
            min_score: 0.2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_levels == 0 || self.native_level >= self.n_levels {
            return Err(Error::InvalidConfig("detector levels"));
        }
        if !(self.factor > 1.0) {
            return Err(Error::InvalidConfig("detector pyramid factor"));
        }
        if self.coarse_stride == 0 || self.sub_steps == 0 {
            return Err(Error::InvalidConfig("detector stride and sub steps"));
        }
        if !self.min_score.is_finite() {
            return Err(Error::InvalidConfig("detector min score"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Projection of the object center, query pixels.
    pub q: Vec2,
    pub scale: f64,
    /// `S_q`, the side of the box holding the unit sphere.
    pub box_size: f64,
    /// Center depth in normalized object units.
    pub depth: f64,
    pub score: f64,
    /// Index into the database views of the template that fired.
    pub template: usize,
    /// Fused coarse map of the winning level.
    pub heatmap: ScoreMap,
}

struct Coarse {
    level: usize,
    /// Window center in query pixels.
    center: Vec2,
    template: usize,
    heatmap: ScoreMap,
}

fn coarse_search(
    pyramid: &Pyramid,
    upsample: f64,
    templates: &[(usize, GrayImage)],
    stride: usize,
) -> Option<Coarse> {
    let mut best: Option<(f64, Coarse)> = None;
    for (level, img) in pyramid.levels.iter().enumerate() {
        let pooled = img.pool(stride);
        let mut fused: Option<(ScoreMap, Vec<usize>)> = None;
        for (id, tpl) in templates {
            let Ok(map) = correlate_all(tpl, &pooled) else {
                continue;
            };
            match &mut fused {
                None => {
                    let n = map.values.len();
                    fused = Some((map, vec![*id; n]));
                }
                Some((f, who)) => {
                    for (i, &v) in map.values.iter().enumerate() {
                        if v > f.values[i] {
                            f.values[i] = v;
                            who[i] = *id;
                        }
                    }
                }
            }
        }
        let Some((mut map, who)) = fused else {
            continue;
        };
        map.scale_id = level;
        let Some((x, y, v)) = map.argmax() else {
            continue;
        };
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            let tw = templates[0].1.width() as f64;
            let g = upsample * pyramid.scale(level);
            let center = Vec2::new(
                ((x * stride) as f64 + 0.5 * tw * stride as f64) / g,
                ((y * stride) as f64 + 0.5 * tw * stride as f64) / g,
            );
            let template = who[y * map.width + x];
            best = Some((
                v,
                Coarse {
                    level,
                    center,
                    template,
                    heatmap: map,
                },
            ));
        }
    }
    best.map(|(_, c)| c)
}

/// Samples a `size × size` patch of `src` at scale `g` whose center sits
/// at query coordinate `anchor`. For `g = 1` and an integer anchor the
/// samples land exactly on pixel centers.
fn scaled_patch(src: &GrayImage, anchor: Vec2, g: f64, size: usize) -> GrayImage {
    let half = 0.5 * size as f64;
    GrayImage::from_fn(size, size, |x, y| {
        src.sample_clamped(
            anchor.x + (x as f64 + 0.5 - half) / g,
            anchor.y + (y as f64 + 0.5 - half) / g,
        )
    })
}

struct FineHit {
    q: Vec2,
    exponent: f64,
    score: f64,
}

fn fine_search(
    query: &GrayImage,
    template: &GrayImage,
    anchor: Vec2,
    level_exponent: i64,
    cfg: &DetectorConfig,
    blurred: &mut Vec<(i64, GrayImage)>,
) -> Option<FineHit> {
    let steps = cfg.sub_steps as i64;
    let radius = 2 * cfg.coarse_stride;
    let tw = template.width();
    let size = tw + 2 * radius;
    let mut hits: Vec<(i64, f64, Vec2)> = Vec::new();
    for m in -steps..=steps {
        let e = level_exponent * steps + m;
        let s = cfg.factor.powf(e as f64 / steps as f64);
        let g = 1.0 / s;
        let src = if g < 1.0 {
            match blurred.iter().position(|(k, _)| *k == e) {
                Some(i) => &blurred[i].1,
                None => {
                    blurred.push((e, query.gaussian_blur(0.5 * (1.0 / (g * g) - 1.0).sqrt())));
                    &blurred.last().unwrap().1
                }
            }
        } else {
            query
        };
        let patch = scaled_patch(src, anchor, g, size);
        let Ok(map) = correlate_all(template, &patch) else {
            continue;
        };
        let Some((x, y, v)) = map.argmax() else {
            continue;
        };
        let dx = if x > 0 && x + 1 < map.width {
            parabolic_offset(map.get(x - 1, y), v, map.get(x + 1, y))
        } else {
            0.0
        };
        let dy = if y > 0 && y + 1 < map.height {
            parabolic_offset(map.get(x, y - 1), v, map.get(x, y + 1))
        } else {
            0.0
        };
        let off = Vec2::new(x as f64 + dx - radius as f64, y as f64 + dy - radius as f64);
        hits.push((e, v, anchor + off / g));
    }
    let (i, &(e, v, q)) = hits
        .iter()
        .enumerate()
        .fold(None::<(usize, &(i64, f64, Vec2))>, |acc, (i, h)| match acc {
            Some((_, b)) if h.1 <= b.1 => acc,
            _ => Some((i, h)),
        })?;
    let mut exponent = e as f64;
    if i > 0 && i + 1 < hits.len() && hits[i - 1].0 == e - 1 && hits[i + 1].0 == e + 1 {
        exponent += parabolic_offset(hits[i - 1].1, v, hits[i + 1].1);
    }
    Some(FineHit {
        q,
        exponent: exponent / steps as f64,
        score: v,
    })
}

/// Finds the object center projection, scale and depth in `query`.
pub fn detect(
    query: &GrayImage,
    db: &ReferenceDatabase,
    k: &Intrinsics,
    cfg: &DetectorConfig,
) -> Result<Detection> {
    cfg.validate()?;
    let stride = cfg.coarse_stride;
    let templates: Vec<(usize, GrayImage)> = db
        .detector_subset
        .iter()
        .map(|&i| (i, db.templates[i].pool(stride)))
        .collect();
    if templates.is_empty() {
        return Err(Error::TooFewReferences {
            needed: 1,
            available: 0,
        });
    }
    let upsample = cfg.factor.powi(cfg.native_level as i32);
    let base = query.resize_by(
        upsample,
        (query.width() as f64 * upsample).ceil() as usize,
        (query.height() as f64 * upsample).ceil() as usize,
    );
    let tpl_side = db.config.template_size;
    // only levels the template fits in
    let mut n_levels = 0;
    for level in 0..cfg.n_levels {
        let g = upsample * cfg.factor.powi(-(level as i32));
        let (w, h) = (query.width() as f64 * g, query.height() as f64 * g);
        if w.floor() as usize >= tpl_side && h.floor() as usize >= tpl_side {
            n_levels = level + 1;
        }
    }
    if n_levels == 0 {
        return Err(Error::ImageTooSmall {
            width: query.width(),
            height: query.height(),
        });
    }
    let pyramid = build_pyramid(&base, n_levels, cfg.factor)?;
    let coarse = coarse_search(&pyramid, upsample, &templates, stride).ok_or(Error::NoDetection {
        score: f64::NEG_INFINITY,
        threshold: cfg.min_score,
    })?;
    let template = &db.templates[coarse.template];
    let level_exponent = coarse.level as i64 - cfg.native_level as i64;
    let mut blurred = Vec::new();
    let mut anchor = Vec2::new(coarse.center.x.round(), coarse.center.y.round());
    let mut hit = None;
    for _ in 0..4 {
        let h = fine_search(query, template, anchor, level_exponent, cfg, &mut blurred).ok_or(
            Error::NoDetection {
                score: f64::NEG_INFINITY,
                threshold: cfg.min_score,
            },
        )?;
        let next = Vec2::new(h.q.x.round(), h.q.y.round());
        hit = Some(h);
        if next == anchor {
            break;
        }
        anchor = next;
    }
    let hit = hit.unwrap();
    if !(hit.score >= cfg.min_score) {
        return Err(Error::NoDetection {
            score: hit.score,
            threshold: cfg.min_score,
        });
    }
    let scale = cfg.factor.powf(hit.exponent);
    let box_size = box_size_from_scale(scale, db.template_size())?;
    let depth = depth_from_scale(virtual_focal(k, &hit.q)?, box_size)?;
    Ok(Detection {
        q: hit.q,
        scale,
        box_size,
        depth,
        score: hit.score,
        template: coarse.template,
        heatmap: coarse.heatmap,
    })
}

/// Initial translation: the point at `depth` along the ray through `q`.
pub fn detection_to_translation(det: &Detection, k: &Intrinsics) -> Vec3 {
    let ray = k.ray(&det.q);
    ray * (det.depth / ray.norm())
}

/// Axis-aligned square crop of side `S_q` around `q`, resampled to
/// `out_size`. Pixels outside the query take its border mean and are
/// masked out.
pub fn crop_query(query: &GrayImage, det: &Detection, out_size: usize) -> (GrayImage, Vec<bool>) {
    let step = det.box_size / out_size as f64;
    let src = if step > 1.0 {
        query.gaussian_blur(0.5 * (step * step - 1.0).sqrt())
    } else {
        query.clone()
    };
    let fill = query.border_mean();
    let half = 0.5 * out_size as f64;
    let mut mask = Vec::with_capacity(out_size * out_size);
    let img = GrayImage::from_fn(out_size, out_size, |x, y| {
        let v = src.sample(
            det.q.x + (x as f64 + 0.5 - half) * step,
            det.q.y + (y as f64 + 0.5 - half) * step,
        );
        mask.push(v.is_some());
        v.unwrap_or(fill)
    });
    (img, mask)
}
