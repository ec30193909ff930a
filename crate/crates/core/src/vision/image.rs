//! Image buffers and portable pixmap/graymap I/O.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PNM: {0}")]
    Format(String),
}

/// Row-major 8-bit RGB image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRGB {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageRGB {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != width * height * 3 {
            return Err(ImageError::Format(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn read_ppm<R: BufRead>(r: R) -> Result<Self, ImageError> {
        let (magic, width, height, data) = read_pnm(r)?;
        if magic != "P6" {
            return Err(ImageError::Format(format!("expected P6, found {magic}")));
        }
        Self::from_pixels(width, height, data)
    }
}

/// Row-major binary mask; every pixel is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBinary {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageBinary {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    /// Any non-zero input byte becomes 1.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::Format(format!(
                "expected {} bytes for {width}x{height} mask, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels: pixels.into_iter().map(|p| u8::from(p != 0)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.pixels[y * self.width + x] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|p| **p != 0).count()
    }

    /// Writes a P5 graymap with set pixels at 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|p| if *p != 0 { 255 } else { 0 })
            .collect();
        w.write_all(&bytes)
    }

    /// Reads a P5 graymap, thresholding at 128.
    pub fn read_pgm<R: BufRead>(r: R) -> Result<Self, ImageError> {
        let (magic, width, height, data) = read_pnm(r)?;
        if magic != "P5" {
            return Err(ImageError::Format(format!("expected P5, found {magic}")));
        }
        let pixels = data.into_iter().map(|p| u8::from(p >= 128)).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

fn next_token<R: BufRead>(r: &mut R) -> Result<String, ImageError> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return if token.is_empty() {
                Err(ImageError::Format("unexpected end of header".into()))
            } else {
                Ok(token)
            };
        }
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            return Ok(token);
        }
        token.push(c as char);
    }
}

fn read_pnm<R: BufRead>(mut r: R) -> Result<(String, usize, usize, Vec<u8>), ImageError> {
    let magic = next_token(&mut r)?;
    let parse = |t: String, what: &str| {
        t.parse::<usize>()
            .map_err(|_| ImageError::Format(format!("bad {what}: {t:?}")))
    };
    let width = parse(next_token(&mut r)?, "width")?;
    let height = parse(next_token(&mut r)?, "height")?;
    let maxval = parse(next_token(&mut r)?, "maxval")?;
    if maxval != 255 {
        return Err(ImageError::Format(format!(
            "only maxval 255 is supported, got {maxval}"
        )));
    }
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(ImageError::Format(format!("unsupported magic {other:?}"))),
    };
    let mut data = vec![0u8; width * height * channels];
    r.read_exact(&mut data)?;
    Ok((magic, width, height, data))
}
