/// One instrument band with its Sentinel-2 counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBand {
    pub id: &'static str,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub cut_on_nm: f64,
    pub cut_off_nm: f64,
    pub sentinel2_id: &'static str,
    pub sentinel2_gsd_m: f64,
    /// Sentinel-2A mean exoatmospheric solar irradiance, W m^-2 um^-1.
    pub esun: f64,
}

pub const PAN_BAND: SpectralBand = SpectralBand {
    id: "PAN",
    center_nm: 625.0,
    fwhm_nm: 250.0,
    cut_on_nm: 500.0,
    cut_off_nm: 750.0,
    sentinel2_id: "",
    sentinel2_gsd_m: 0.0,
    esun: 0.0,
};

pub const MS_BANDS: [SpectralBand; 7] = [
    SpectralBand {
        id: "MS1",
        center_nm: 490.0,
        fwhm_nm: 65.0,
        cut_on_nm: 457.5,
        cut_off_nm: 522.5,
        sentinel2_id: "B02",
        sentinel2_gsd_m: 10.0,
        esun: 1941.63,
    },
    SpectralBand {
        id: "MS2",
        center_nm: 560.0,
        fwhm_nm: 35.0,
        cut_on_nm: 542.5,
        cut_off_nm: 577.5,
        sentinel2_id: "B03",
        sentinel2_gsd_m: 10.0,
        esun: 1822.61,
    },
    SpectralBand {
        id: "MS3",
        center_nm: 665.0,
        fwhm_nm: 30.0,
        cut_on_nm: 650.0,
        cut_off_nm: 680.0,
        sentinel2_id: "B04",
        sentinel2_gsd_m: 10.0,
        esun: 1512.79,
    },
    SpectralBand {
        id: "MS4",
        center_nm: 705.0,
        fwhm_nm: 15.0,
        cut_on_nm: 697.5,
        cut_off_nm: 712.5,
        sentinel2_id: "B05",
        sentinel2_gsd_m: 20.0,
        esun: 1425.56,
    },
    SpectralBand {
        id: "MS5",
        center_nm: 740.0,
        fwhm_nm: 15.0,
        cut_on_nm: 732.5,
        cut_off_nm: 747.5,
        sentinel2_id: "B06",
        sentinel2_gsd_m: 20.0,
        esun: 1288.32,
    },
    SpectralBand {
        id: "MS6",
        center_nm: 783.0,
        fwhm_nm: 20.0,
        cut_on_nm: 773.0,
        cut_off_nm: 793.0,
        sentinel2_id: "B07",
        sentinel2_gsd_m: 20.0,
        esun: 1163.19,
    },
    SpectralBand {
        id: "MS7",
        center_nm: 842.0,
        fwhm_nm: 115.0,
        cut_on_nm: 784.5,
        cut_off_nm: 899.5,
        sentinel2_id: "B08",
        sentinel2_gsd_m: 10.0,
        esun: 1036.39,
    },
];
