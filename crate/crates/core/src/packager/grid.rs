//! Packing thumbnails into container sprite sheets and cutting them back out.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::mapping::{locate_tile, ThumbGeometry};

pub const DEFAULT_JPEG_QUALITY: u8 = 90;

/// Pack tiles row-major into containers; the last container is filled up
/// with solid black tiles.
pub fn compose_containers(tiles: &[RgbImage], geom: &ThumbGeometry) -> Result<Vec<RgbImage>> {
    if let Some((i, t)) = tiles
        .iter()
        .enumerate()
        .find(|(_, t)| t.dimensions() != (geom.tile_width, geom.tile_height))
    {
        return Err(Error::Validation(format!(
            "tile {i} is {}x{}, expected {}x{}",
            t.width(),
            t.height(),
            geom.tile_width,
            geom.tile_height
        )));
    }
    let per = geom.tiles_per_container as usize;
    Ok(tiles
        .chunks(per)
        .map(|chunk| {
            let mut sheet =
                RgbImage::from_pixel(geom.container_width(), geom.container_height(), Rgb([0, 0, 0]));
            for (i, tile) in chunk.iter().enumerate() {
                let (x, y) = locate_tile(i as u64, geom).pixel_origin(geom);
                image::imageops::replace(&mut sheet, tile, x as i64, y as i64);
            }
            sheet
        })
        .collect())
}

/// Cut the first `valid_count` tiles out of a container in row-major order.
pub fn slice_container(
    container: &RgbImage,
    geom: &ThumbGeometry,
    valid_count: u32,
) -> Result<Vec<RgbImage>> {
    if container.dimensions() != (geom.container_width(), geom.container_height()) {
        return Err(Error::Validation(format!(
            "container is {}x{}, expected {}x{}",
            container.width(),
            container.height(),
            geom.container_width(),
            geom.container_height()
        )));
    }
    if valid_count == 0 || valid_count > geom.tiles_per_container {
        return Err(Error::Validation(format!(
            "valid tile count {valid_count} outside 1..={}",
            geom.tiles_per_container
        )));
    }
    Ok((0..valid_count as u64)
        .map(|i| {
            let (x, y) = locate_tile(i, geom).pixel_origin(geom);
            image::imageops::crop_imm(container, x, y, geom.tile_width, geom.tile_height).to_image()
        })
        .collect())
}

pub fn encode_jpeg(image: &RgbImage, quality: u8) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality).encode_image(image)?;
    Ok(buf)
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Decode any supported still image into RGB8.
pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(c: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(160, 90, Rgb(c))
    }

    fn geom() -> ThumbGeometry {
        ThumbGeometry::default()
    }

    #[test]
    fn exact_fill_has_no_padding() {
        let tiles: Vec<_> = (0..25).map(|i| solid([i as u8 * 10 + 1, 0, 0])).collect();
        let sheets = compose_containers(&tiles, &geom()).unwrap();
        assert_eq!(sheets.len(), 1);
        assert_eq!(sheets[0].dimensions(), (800, 450));
        // tile 7 -> row 1, col 2
        assert_eq!(sheets[0].get_pixel(2 * 160 + 5, 90 + 5), &Rgb([71, 0, 0]));
    }

    #[test]
    fn partial_container_is_black_padded() {
        let tiles: Vec<_> = (0..37).map(|_| solid([200, 100, 50])).collect();
        let sheets = compose_containers(&tiles, &geom()).unwrap();
        assert_eq!(sheets.len(), 2);
        let last = &sheets[1];
        // tile 11 real, tile 12 padding
        assert_eq!(last.get_pixel(160 + 1, 2 * 90 + 1), &Rgb([200, 100, 50]));
        assert_eq!(last.get_pixel(2 * 160 + 1, 2 * 90 + 1), &Rgb([0, 0, 0]));
        let back = slice_container(last, &geom(), 12).unwrap();
        assert_eq!(back.len(), 12);
        assert!(back.iter().all(|t| t.pixels().all(|p| p.0 != [0, 0, 0])));
    }

    #[test]
    fn empty_input_gives_no_containers() {
        assert!(compose_containers(&[], &geom()).unwrap().is_empty());
    }

    #[test]
    fn wrong_tile_size_names_index() {
        let mut tiles = vec![solid([1, 1, 1]); 3];
        tiles[2] = RgbImage::new(10, 10);
        match compose_containers(&tiles, &geom()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("tile 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slice_bounds() {
        let sheet = RgbImage::new(800, 450);
        assert!(slice_container(&sheet, &geom(), 26).is_err());
        assert!(slice_container(&sheet, &geom(), 0).is_err());
        assert!(slice_container(&RgbImage::new(800, 449), &geom(), 1).is_err());
        assert_eq!(slice_container(&sheet, &geom(), 25).unwrap().len(), 25);
    }
}
