use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    TvHigh,
    TvLow,
    Ntv,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 3] = [VehicleClass::TvHigh, VehicleClass::TvLow, VehicleClass::Ntv];

    pub fn is_tv(self) -> bool {
        !matches!(self, VehicleClass::Ntv)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::TvHigh => "tv_high",
            VehicleClass::TvLow => "tv_low",
            VehicleClass::Ntv => "ntv",
        }
    }
}

/// Lanes are 0 and 1 internally; output files number them 1 and 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub lane: u8,
    pub cell: u32,
    /// Cells per step.
    pub v: u32,
    pub class: VehicleClass,
    /// Dollars per second.
    pub cvot_true: f64,
    pub cvot_declared: f64,
    pub entry_step: u64,
}

const EMPTY: u32 = u32::MAX;

/// Two-lane cell grid. `occupancy[lane][cell]` holds an index into
/// `vehicles` or nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n_cells: u32,
    ring: bool,
    occupancy: [Vec<u32>; 2],
    vehicles: Vec<VehicleState>,
    pub step: u64,
    /// Id for the next injected vehicle.
    pub next_id: u32,
}

impl Lattice {
    pub fn new(n_cells: u32, ring: bool) -> Self {
        Lattice {
            n_cells,
            ring,
            occupancy: [vec![EMPTY; n_cells as usize], vec![EMPTY; n_cells as usize]],
            vehicles: Vec::new(),
            step: 0,
            next_id: 0,
        }
    }

    pub fn n_cells(&self) -> u32 {
        self.n_cells
    }

    pub fn is_ring(&self) -> bool {
        self.ring
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn insert(&mut self, v: VehicleState) -> Result<usize, SimError> {
        if v.lane > 1 || v.cell >= self.n_cells {
            return Err(SimError::OutOfLattice { lane: v.lane, cell: v.cell });
        }
        let slot = &mut self.occupancy[v.lane as usize][v.cell as usize];
        if *slot != EMPTY {
            return Err(SimError::Occupied { lane: v.lane, cell: v.cell });
        }
        let idx = self.vehicles.len();
        *slot = idx as u32;
        self.next_id = self.next_id.max(v.id.0 + 1);
        self.vehicles.push(v);
        Ok(idx)
    }

    /// Index of the vehicle in (lane, cell), if any.
    pub fn occupant(&self, lane: u8, cell: u32) -> Option<usize> {
        let k = self.occupancy[lane as usize][cell as usize];
        (k != EMPTY).then_some(k as usize)
    }

    pub fn is_free(&self, lane: u8, cell: u32) -> bool {
        self.occupancy[lane as usize][cell as usize] == EMPTY
    }

    /// Distance in cells from `cell` to the nearest vehicle ahead in `lane`.
    /// With `include_same`, a vehicle in `cell` itself counts at distance 0.
    /// On a ring a vehicle can find itself one lap ahead; on an open road
    /// `None` means no leader before the downstream end.
    pub fn leader_gap(&self, lane: u8, cell: u32, include_same: bool) -> Option<u32> {
        let occ = &self.occupancy[lane as usize];
        let first = if include_same { 0 } else { 1 };
        if self.ring {
            let last = if include_same { self.n_cells - 1 } else { self.n_cells };
            (first..=last).find(|&d| occ[((cell + d) % self.n_cells) as usize] != EMPTY)
        } else {
            (first..self.n_cells - cell).find(|&d| occ[(cell + d) as usize] != EMPTY)
        }
    }

    /// Nearest vehicle strictly behind `cell` in `lane`, skipping those for
    /// which `skip` holds. Returns (vehicle index, distance).
    pub fn lag_where(&self, lane: u8, cell: u32, mut skip: impl FnMut(usize) -> bool) -> Option<(usize, u32)> {
        let occ = &self.occupancy[lane as usize];
        let reach = if self.ring { self.n_cells - 1 } else { cell };
        for d in 1..=reach {
            let c = if self.ring {
                (cell + self.n_cells - d) % self.n_cells
            } else {
                cell - d
            };
            let k = occ[c as usize];
            if k != EMPTY && !skip(k as usize) {
                return Some((k as usize, d));
            }
        }
        None
    }

    /// Vehicle indices from the downstream end upstream; lane 0 before lane 1
    /// within a cell.
    pub fn downstream_order(&self, out: &mut Vec<usize>) {
        out.clear();
        for cell in (0..self.n_cells as usize).rev() {
            for lane in 0..2 {
                let k = self.occupancy[lane][cell];
                if k != EMPTY {
                    out.push(k as usize);
                }
            }
        }
    }

    /// Replaces the vehicle set and rebuilds occupancy. Fails on a double
    /// booking, which would mean two vehicles collided.
    pub(crate) fn replace_vehicles(&mut self, vehicles: Vec<VehicleState>) -> Result<(), SimError> {
        for lane in &mut self.occupancy {
            lane.fill(EMPTY);
        }
        for (i, v) in vehicles.iter().enumerate() {
            let slot = &mut self.occupancy[v.lane as usize][v.cell as usize];
            if *slot != EMPTY {
                return Err(SimError::Collision {
                    step: self.step,
                    lane: v.lane,
                    cell: v.cell,
                });
            }
            *slot = i as u32;
        }
        self.vehicles = vehicles;
        Ok(())
    }

    /// Occupancy and vehicle list agree.
    pub fn is_consistent(&self) -> bool {
        let occupied: usize = self.occupancy.iter().map(|l| l.iter().filter(|&&k| k != EMPTY).count()).sum();
        occupied == self.vehicles.len()
            && self
                .vehicles
                .iter()
                .enumerate()
                .all(|(i, v)| self.occupancy[v.lane as usize][v.cell as usize] == i as u32)
    }
}
