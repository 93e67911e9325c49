use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const RED: Rgb = Rgb(255, 0, 0);
    pub const BLUE: Rgb = Rgb(0, 0, 255);

    pub fn swap_red_blue(self) -> Rgb {
        Rgb(self.2, self.1, self.0)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

fn half_up(x: f64) -> u8 {
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Diverging blue-white-red map: `-clip` is pure blue, 0 white, `+clip`
/// pure red, linear in between, values beyond `clip` saturate.
pub fn color_of(value: f64, clip: f64) -> Result<Rgb> {
    if clip.is_nan() || clip <= 0.0 {
        return Err(Error::NonPositiveClip(clip));
    }
    let v = value.clamp(-clip, clip) / clip;
    Ok(if v >= 0.0 {
        let c = half_up(255.0 * (1.0 - v));
        Rgb(255, c, c)
    } else {
        let c = half_up(255.0 * (1.0 + v));
        Rgb(c, c, 255)
    })
}
