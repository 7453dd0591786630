use std::io::Write;

use super::RatingMatrix;
use crate::error::Result;

/// Writes `user_id,item_id,value,timestamp` lines (header included), users
/// in index order and items ascending. The timestamp column is empty when
/// the source had none.
pub fn write_canonical(m: &RatingMatrix, mut out: impl Write) -> Result<()> {
    writeln!(out, "user_id,item_id,value,timestamp")?;
    for (u, row) in m.rows().iter().enumerate() {
        let ts = m.row_timestamps(u);
        for (pos, (i, v)) in row.iter().enumerate() {
            let user = m.user_ids()[u];
            let item = m.item_ids()[i as usize];
            match ts {
                Some(ts) => writeln!(out, "{user},{item},{v},{}", ts[pos])?,
                None => writeln!(out, "{user},{item},{v},")?,
            }
        }
    }
    Ok(())
}
