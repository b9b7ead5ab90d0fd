//! CSV output shared by every table: comma separated, `.` decimal point,
//! optional `#` comment lines before the header.

use std::io::Write;

use crate::error::Result;

/// Shortest round-trip representation, exponent form for very small or
/// large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub struct TableWriter<W: Write> {
    inner: ::csv::Writer<W>,
}

impl<W: Write> TableWriter<W> {
    /// Writes `comments` as `# ...` lines followed by the header row.
    pub fn new(mut out: W, comments: &[String], header: &[&str]) -> Result<Self> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let mut inner = ::csv::WriterBuilder::new().from_writer(out);
        inner.write_record(header).map_err(csv_err)?;
        Ok(TableWriter { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_err(e: ::csv::Error) -> crate::Error {
    match e.into_kind() {
        ::csv::ErrorKind::Io(io) => io.into(),
        other => std::io::Error::other(format!("{other:?}")).into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_then_header() {
        let mut buf = Vec::new();
        let mut w = TableWriter::new(&mut buf, &["b=1".to_string()], &["a", "b"]).unwrap();
        w.row([fmt_f64(0.5), fmt_f64(1e-20)]).unwrap();
        w.finish().unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# b=1\na,b\n0.5,1e-20\n");
    }
}
