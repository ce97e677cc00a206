//! GF(256) arithmetic over the QR polynomial x^8 + x^4 + x^3 + x^2 + 1.

/// Reduction polynomial 0x11D, generator alpha = 2.
const POLY: u16 = 0x11D;

/// Precomputed exp/log tables; `exp` is doubled so products index without
/// a modulo.
pub struct Field {
    exp: [u8; 512],
    log: [u8; 256],
}

impl Field {
    pub const fn new() -> Self {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u16 = 1;
        let mut i = 0;
        while i < 255 {
            exp[i] = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= POLY;
            }
            i += 1;
        }
        i = 255;
        while i < 512 {
            exp[i] = exp[i - 255];
            i += 1;
        }
        Self { exp, log }
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    /// Division by zero is a caller bug.
    #[inline]
    pub fn div(&self, a: u8, b: u8) -> u8 {
        self.mul(a, self.inv(b))
    }

    #[inline]
    pub fn inv(&self, a: u8) -> u8 {
        assert!(a != 0, "GF(256) inverse of zero");
        self.exp[255 - self.log[a as usize] as usize]
    }

    /// alpha^n for any integer exponent.
    #[inline]
    pub fn alpha_pow(&self, n: i32) -> u8 {
        self.exp[n.rem_euclid(255) as usize]
    }
}

/// Shared table instance.
pub fn field() -> &'static Field {
    static FIELD: std::sync::OnceLock<Field> = std::sync::OnceLock::new();
    FIELD.get_or_init(Field::new)
}
