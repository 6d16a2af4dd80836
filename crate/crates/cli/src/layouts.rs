//! Published power tables (percent, alpha = 0.05) used as layouts and
//! reference columns.

/// One `(n, KS %, NP %)` row.
pub type Row = (usize, u32, u32);

pub struct Block {
    pub theta: f64,
    pub rows: &'static [Row],
}

pub struct PowerTable {
    pub id: u8,
    pub r: f64,
    pub blocks: [Block; 3],
}

pub const POWER_TABLES: [PowerTable; 4] = [
    PowerTable {
        id: 1,
        r: 0.7,
        blocks: [
            Block {
                theta: 0.1,
                rows: &[
                    (16, 5, 30),
                    (28, 6, 40),
                    (41, 7, 50),
                    (60, 9, 60),
                    (80, 11, 70),
                    (300, 30, 98),
                    (410, 40, 100),
                    (520, 50, 100),
                    (640, 60, 100),
                    (780, 70, 100),
                ],
            },
            Block {
                theta: 0.05,
                rows: &[
                    (11, 4, 15),
                    (20, 4, 20),
                    (42, 5, 30),
                    (70, 6, 40),
                    (105, 7, 50),
                    (150, 7, 60),
                    (540, 15, 94),
                    (750, 20, 98),
                    (1200, 30, 100),
                    (1600, 40, 100),
                    (2080, 50, 100),
                    (2500, 60, 100),
                ],
            },
            Block {
                theta: 0.02,
                rows: &[
                    (40, 4, 15),
                    (70, 5, 20),
                    (155, 5, 30),
                    (250, 5, 40),
                    (3200, 15, 99),
                    (4900, 20, 100),
                    (7700, 30, 100),
                    (10100, 40, 100),
                ],
            },
        ],
    },
    PowerTable {
        id: 2,
        r: 0.6,
        blocks: [
            Block {
                theta: 0.1,
                rows: &[
                    (16, 5, 20),
                    (35, 6, 30),
                    (60, 7, 40),
                    (92, 9, 50),
                    (127, 10, 60),
                    (175, 13, 70),
                    (300, 20, 86),
                    (480, 30, 96),
                    (640, 40, 99),
                    (840, 50, 100),
                    (1040, 60, 100),
                    (1280, 70, 100),
                ],
            },
            Block {
                theta: 0.05,
                rows: &[
                    (27, 5, 15),
                    (48, 5, 20),
                    (105, 6, 30),
                    (180, 7, 40),
                    (260, 8, 50),
                    (370, 9, 60),
                    (800, 15, 85),
                    (1045, 20, 94),
                    (1900, 30, 99),
                    (2600, 40, 100),
                    (3300, 50, 100),
                    (4100, 60, 100),
                ],
            },
            Block {
                theta: 0.02,
                rows: &[
                    (110, 4, 15),
                    (205, 5, 20),
                    (460, 6, 30),
                    (5400, 15, 95),
                    (7800, 20, 99),
                    (12000, 30, 100),
                ],
            },
        ],
    },
    PowerTable {
        id: 3,
        r: 0.4,
        blocks: [
            Block {
                theta: 0.2,
                rows: &[
                    (15, 5, 15),
                    (28, 6, 20),
                    (62, 9, 30),
                    (100, 11, 40),
                    (148, 14, 50),
                    (153, 15, 51),
                    (200, 18, 60),
                    (225, 20, 64),
                    (270, 24, 70),
                    (350, 30, 79),
                    (500, 40, 90),
                    (640, 50, 95),
                    (795, 60, 97),
                    (970, 70, 99),
                ],
            },
            Block {
                theta: 0.1,
                rows: &[
                    (54, 5, 15),
                    (105, 6, 20),
                    (220, 8, 30),
                    (360, 11, 40),
                    (510, 13, 50),
                    (600, 15, 55),
                    (700, 16, 60),
                    (870, 20, 68),
                    (1430, 30, 84),
                    (1950, 40, 93),
                    (2500, 50, 97),
                    (3160, 60, 99),
                ],
            },
            Block {
                theta: 0.05,
                rows: &[
                    (205, 6, 15),
                    (400, 6, 20),
                    (810, 8, 30),
                    (2400, 15, 59),
                    (3400, 20, 72),
                    (5600, 30, 88),
                ],
            },
        ],
    },
    PowerTable {
        id: 4,
        r: 0.3,
        blocks: [
            Block {
                theta: 0.2,
                rows: &[
                    (40, 6, 15),
                    (75, 7, 20),
                    (165, 10, 30),
                    (255, 13, 40),
                    (300, 15, 44),
                    (360, 17, 50),
                    (430, 20, 56),
                    (480, 22, 60),
                    (645, 28, 70),
                    (710, 30, 73),
                    (980, 40, 84),
                    (1260, 50, 91),
                    (1600, 60, 96),
                    (1950, 70, 98),
                ],
            },
            Block {
                theta: 0.1,
                rows: &[
                    (160, 5, 15),
                    (300, 7, 20),
                    (610, 10, 30),
                    (950, 13, 40),
                    (1200, 15, 47),
                    (1340, 17, 50),
                    (1700, 20, 58),
                    (1830, 21, 60),
                    (2800, 30, 76),
                    (3880, 40, 87),
                    (5050, 50, 93),
                    (6350, 60, 97),
                ],
            },
            Block {
                theta: 0.05,
                rows: &[
                    (640, 6, 15),
                    (1200, 7, 20),
                    (2300, 10, 30),
                    (4800, 15, 47),
                    (6800, 20, 59),
                    (11100, 30, 77),
                ],
            },
        ],
    },
];

/// Power levels (percent) of the ratio table.
pub const RATIO_POWERS: [u32; 7] = [15, 20, 30, 40, 50, 60, 70];

/// Published `N/n` ratios; `None` where the table has no entry.
pub struct RatioRow {
    pub r: f64,
    pub theta: f64,
    pub ratios: [Option<f64>; 7],
}

pub const RATIO_TABLE: [RatioRow; 12] = [
    RatioRow { r: 0.7, theta: 0.1, ratios: [None, None, Some(18.8), Some(14.6), Some(12.7), Some(10.7), Some(9.8)] },
    RatioRow { r: 0.7, theta: 0.05, ratios: [Some(49.1), Some(37.5), Some(28.6), Some(22.9), Some(19.8), Some(16.7), None] },
    RatioRow { r: 0.7, theta: 0.02, ratios: [Some(80.0), Some(70.0), Some(49.7), Some(40.4), None, None, None] },
    RatioRow { r: 0.6, theta: 0.1, ratios: [None, Some(18.8), Some(13.7), Some(10.7), Some(9.1), Some(8.2), Some(7.3)] },
    RatioRow { r: 0.6, theta: 0.05, ratios: [Some(29.6), Some(21.8), Some(18.1), Some(14.4), Some(12.7), Some(11.1), None] },
    RatioRow { r: 0.6, theta: 0.02, ratios: [Some(49.1), Some(38.1), Some(26.1), None, None, None, None] },
    RatioRow { r: 0.4, theta: 0.2, ratios: [Some(10.2), Some(8.0), Some(5.7), Some(5.0), Some(4.3), Some(4.0), Some(3.6)] },
    RatioRow { r: 0.4, theta: 0.1, ratios: [Some(11.1), Some(8.3), Some(6.6), Some(5.4), Some(4.9), Some(4.5), None] },
    RatioRow { r: 0.4, theta: 0.05, ratios: [Some(11.7), Some(8.5), Some(6.9), None, None, None, None] },
    RatioRow { r: 0.3, theta: 0.2, ratios: [Some(7.5), Some(5.7), Some(4.3), Some(3.8), Some(3.5), Some(3.3), Some(3.0)] },
    RatioRow { r: 0.3, theta: 0.1, ratios: [Some(7.5), Some(5.7), Some(4.6), Some(4.1), Some(3.8), Some(3.5), None] },
    RatioRow { r: 0.3, theta: 0.05, ratios: [Some(7.5), Some(5.7), Some(4.8), None, None, None, None] },
];

pub fn power_table(id: u8) -> Option<&'static PowerTable> {
    POWER_TABLES.iter().find(|t| t.id == id)
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

/// NP sample size whose published NP power equals `pct` for `(r, theta)`.
pub fn np_sample_size(r: f64, theta: f64, pct: u32) -> Option<usize> {
    let table = POWER_TABLES.iter().find(|t| same(t.r, r))?;
    let block = table.blocks.iter().find(|b| same(b.theta, theta))?;
    block.rows.iter().find(|row| row.2 == pct).map(|row| row.0)
}
