//! Plain-text weight snapshots.
//!
//! Format, one value per whitespace slot:
//!
//! ```text
//! layers=L
//! layer 0 rows R cols C activation relu
//! <R lines of C space-separated weights>
//! <one line of R biases>
//! layer 1 ...
//! ```
//!
//! Floats are printed with the shortest decimal representation that parses
//! back to the same bits, so save/load round-trips exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::nn::{Activation, Layer, Network};
use crate::{Error, Result};

pub fn write_network<W: Write>(mut out: W, net: &Network) -> Result<()> {
    if !net.is_finite() {
        return Err(Error::InvalidParameter(
            "refusing to snapshot a network with non-finite entries".into(),
        ));
    }
    writeln!(out, "layers={}", net.num_layers())?;
    for (i, layer) in net.layers().iter().enumerate() {
        writeln!(
            out,
            "layer {} rows {} cols {} activation {}",
            i,
            layer.out_dim(),
            layer.in_dim(),
            layer.activation.name()
        )?;
        for row in layer.weights.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        let bias: Vec<String> = layer.bias.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", bias.join(" "))?;
    }
    Ok(())
}

pub fn save_network(path: &Path, net: &Network) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_network(&mut out, net)?;
    out.flush()?;
    Ok(())
}

struct LineReader<R: BufRead> {
    inner: R,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<String> {
        let mut buf = String::new();
        let n = self.inner.read_line(&mut buf)?;
        self.line_no += 1;
        if n == 0 {
            return Err(Error::Parse {
                line: self.line_no,
                message: "unexpected end of file".into(),
            });
        }
        Ok(buf.trim_end().to_string())
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no,
            message: message.into(),
        }
    }
}

fn parse_finite(s: &str, reader: &LineReader<impl BufRead>) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| reader.err(format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(reader.err(format!("non-finite value `{s}`")));
    }
    Ok(v)
}

pub fn read_network<R: BufRead>(input: R) -> Result<Network> {
    let mut reader = LineReader {
        inner: input,
        line_no: 0,
    };
    let header = reader.next_line()?;
    let count: usize = header
        .strip_prefix("layers=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| reader.err("expected header `layers=L`"))?;
    if count == 0 {
        return Err(reader.err("snapshot declares zero layers"));
    }
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let meta = reader.next_line()?;
        let parts: Vec<&str> = meta.split_whitespace().collect();
        if parts.len() != 8
            || parts[0] != "layer"
            || parts[2] != "rows"
            || parts[4] != "cols"
            || parts[6] != "activation"
        {
            return Err(reader.err(format!(
                "expected `layer {i} rows R cols C activation A`, got `{meta}`"
            )));
        }
        let index: usize = parts[1]
            .parse()
            .map_err(|_| reader.err("invalid layer index"))?;
        if index != i {
            return Err(reader.err(format!("expected layer {i}, found layer {index}")));
        }
        let rows: usize = parts[3]
            .parse()
            .map_err(|_| reader.err("invalid row count"))?;
        let cols: usize = parts[5]
            .parse()
            .map_err(|_| reader.err("invalid column count"))?;
        let activation = Activation::from_name(parts[7])
            .map_err(|_| reader.err(format!("unknown activation `{}`", parts[7])))?;
        let mut weights = Array2::zeros((rows, cols));
        for r in 0..rows {
            let line = reader.next_line()?;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != cols {
                return Err(reader.err(format!(
                    "expected {cols} weights, found {}",
                    values.len()
                )));
            }
            for (c, s) in values.iter().enumerate() {
                weights[[r, c]] = parse_finite(s, &reader)?;
            }
        }
        let line = reader.next_line()?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != rows {
            return Err(reader.err(format!("expected {rows} biases, found {}", values.len())));
        }
        let mut bias = Array1::zeros(rows);
        for (r, s) in values.iter().enumerate() {
            bias[r] = parse_finite(s, &reader)?;
        }
        layers.push(
            Layer::new(weights, bias, activation)
                .map_err(|e| reader.err(format!("invalid layer: {e}")))?,
        );
    }
    let num_classes = layers.last().expect("nonempty").out_dim();
    Network::new(layers, num_classes).map_err(|e| Error::Parse {
        line: reader.line_no,
        message: format!("inconsistent snapshot: {e}"),
    })
}

pub fn load_network(path: &Path) -> Result<Network> {
    let file = File::open(path)?;
    read_network(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{init_network, NetSpec};
    use proptest::prelude::*;

    fn round_trip(net: &Network) -> Network {
        let mut buf = Vec::new();
        write_network(&mut buf, net).unwrap();
        read_network(buf.as_slice()).unwrap()
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let spec = NetSpec {
            input_dim: 3,
            hidden_widths: vec![5, 4],
            hidden_activation: Activation::Tanh,
            num_classes: 2,
        };
        let net = init_network(&spec, 99).unwrap();
        let back = round_trip(&net);
        assert_eq!(net, back);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.txt");
        let spec = NetSpec {
            input_dim: 2,
            hidden_widths: vec![3],
            hidden_activation: Activation::ReLU,
            num_classes: 2,
        };
        let net = init_network(&spec, 7).unwrap();
        save_network(&path, &net).unwrap();
        let back = load_network(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn rejects_truncated_and_corrupt_files() {
        let text = "layers=1\nlayer 0 rows 2 cols 2 activation relu\n1 2\n";
        assert!(matches!(
            read_network(text.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
        let nan = "layers=1\nlayer 0 rows 1 cols 1 activation relu\nNaN\n0\n";
        assert!(matches!(
            read_network(nan.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    proptest! {
        // Round-trip on adversarial float values, including subnormals and
        // extreme magnitudes.
        #[test]
        fn weights_round_trip_exactly(bits in proptest::collection::vec(any::<u64>(), 4)) {
            let values: Vec<f64> = bits
                .iter()
                .map(|&b| {
                    let v = f64::from_bits(b);
                    if v.is_finite() { v } else { 1.0 }
                })
                .collect();
            let weights = Array2::from_shape_vec((2, 2), values).unwrap();
            let layer = Layer::new(weights, Array1::zeros(2), Activation::Identity).unwrap();
            let net = Network::new(vec![layer], 2).unwrap();
            let back = round_trip(&net);
            prop_assert_eq!(net, back);
        }
    }
}
