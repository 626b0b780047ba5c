use super::DataplaneError;

/// Access mode for [`RegisterArray::access`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegisterOp {
    Read,
    Add(i64),
    Write(i64),
}

/// Fixed-length array of signed counters, all starting at zero.
///
/// Values are bounded by the declared width (32 or 64 bits, two's
/// complement); an update that would leave that range fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterArray {
    width_bits: u32,
    slots: Vec<i64>,
}

impl RegisterArray {
    pub fn new(width_bits: u32, length: usize) -> Result<Self, DataplaneError> {
        if width_bits != 32 && width_bits != 64 {
            return Err(DataplaneError::InvalidArgument(format!(
                "register width must be 32 or 64 bits, got {width_bits}"
            )));
        }
        Ok(RegisterArray { width_bits, slots: vec![0; length] })
    }

    pub fn width_bits(&self) -> u32 {
        self.width_bits
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn fits(&self, v: i64) -> bool {
        self.width_bits == 64 || i32::try_from(v).is_ok()
    }

    fn check_index(&self, idx: usize) -> Result<(), DataplaneError> {
        if idx < self.slots.len() {
            Ok(())
        } else {
            Err(DataplaneError::IndexOutOfBounds { index: idx, len: self.slots.len() })
        }
    }

    pub fn read(&self, idx: usize) -> Result<i64, DataplaneError> {
        self.check_index(idx)?;
        Ok(self.slots[idx])
    }

    /// Adds `delta` and returns the post-update value.
    pub fn add(&mut self, idx: usize, delta: i64) -> Result<i64, DataplaneError> {
        self.check_index(idx)?;
        let next = self.slots[idx]
            .checked_add(delta)
            .filter(|v| self.fits(*v))
            .ok_or(DataplaneError::Overflow { op: "register add" })?;
        self.slots[idx] = next;
        Ok(next)
    }

    pub fn write(&mut self, idx: usize, v: i64) -> Result<i64, DataplaneError> {
        self.check_index(idx)?;
        if !self.fits(v) {
            return Err(DataplaneError::Overflow { op: "register write" });
        }
        self.slots[idx] = v;
        Ok(v)
    }

    pub fn access(&mut self, idx: usize, op: RegisterOp) -> Result<i64, DataplaneError> {
        match op {
            RegisterOp::Read => self.read(idx),
            RegisterOp::Add(d) => self.add(idx, d),
            RegisterOp::Write(v) => self.write(idx, v),
        }
    }

    /// Bulk clear, as done by the control plane between windows.
    pub fn reset(&mut self) {
        self.slots.fill(0);
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.slots.iter().copied()
    }
}
