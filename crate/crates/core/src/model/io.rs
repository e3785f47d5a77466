//! Binary model container.
//!
//! Layout: 8-byte magic `XAUDMDL1`, a format version byte, a model kind byte
//! (0 = MLP, 1 = forest), a task byte, then little-endian dimensions followed
//! by 64-bit float payloads in layer (or tree) order. Loading is strict: bad
//! magic, unknown version, or a short read fails without producing a model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::forest::{LeafValue, RandomForest, Tree, TreeNode};
use super::mlp::{Activation, LayerSpec, MlpModel};
use super::{Model, ModelError, Task};

const MAGIC: &[u8; 8] = b"XAUDMDL1";
const VERSION: u8 = 1;
const KIND_MLP: u8 = 0;
const KIND_FOREST: u8 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u8(r: &mut impl Read) -> std::io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn task_byte(task: Task) -> u8 {
    match task {
        Task::Classification => 0,
        Task::Regression => 1,
    }
}

fn task_from_byte(b: u8) -> Result<Task, ModelError> {
    match b {
        0 => Ok(Task::Classification),
        1 => Ok(Task::Regression),
        other => Err(ModelError::Format(format!("unknown task byte {}", other))),
    }
}

fn activation_byte(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Identity => 1,
        Activation::Sigmoid => 2,
        Activation::Softmax => 3,
    }
}

fn activation_from_byte(b: u8) -> Result<Activation, ModelError> {
    match b {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Identity),
        2 => Ok(Activation::Sigmoid),
        3 => Ok(Activation::Softmax),
        other => Err(ModelError::Format(format!(
            "unknown activation byte {}",
            other
        ))),
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    match model {
        Model::Mlp(mlp) => {
            w.write_all(&[KIND_MLP, task_byte(mlp.task)])?;
            write_u32(&mut w, mlp.input_dim as u32)?;
            write_u32(&mut w, mlp.layers.len() as u32)?;
            for layer in &mlp.layers {
                write_u32(&mut w, layer.in_dim() as u32)?;
                write_u32(&mut w, layer.out_dim() as u32)?;
                w.write_all(&[activation_byte(layer.activation)])?;
                for &v in &layer.weight {
                    write_f64(&mut w, v)?;
                }
                for &v in &layer.bias {
                    write_f64(&mut w, v)?;
                }
            }
        }
        Model::Forest(forest) => {
            w.write_all(&[KIND_FOREST, task_byte(forest.task)])?;
            write_u32(&mut w, forest.input_dim as u32)?;
            write_u32(&mut w, forest.n_classes as u32)?;
            write_u64(&mut w, forest.seed)?;
            write_u32(&mut w, forest.trees.len() as u32)?;
            for tree in &forest.trees {
                write_u32(&mut w, tree.nodes.len() as u32)?;
                for node in &tree.nodes {
                    match node {
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            w.write_all(&[0u8])?;
                            write_u32(&mut w, *feature as u32)?;
                            write_f64(&mut w, *threshold)?;
                            write_u32(&mut w, *left as u32)?;
                            write_u32(&mut w, *right as u32)?;
                        }
                        TreeNode::Leaf { value } => {
                            w.write_all(&[1u8])?;
                            match value {
                                LeafValue::ClassCounts(counts) => {
                                    write_u32(&mut w, counts.len() as u32)?;
                                    for &c in counts {
                                        write_f64(&mut w, c)?;
                                    }
                                }
                                LeafValue::Mean(m) => {
                                    write_f64(&mut w, *m)?;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Format(format!(
            "bad magic header {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let version = read_u8(&mut r)?;
    if version != VERSION {
        return Err(ModelError::Format(format!(
            "unsupported format version {}, expected {}",
            version, VERSION
        )));
    }
    let kind = read_u8(&mut r)?;
    let task = task_from_byte(read_u8(&mut r)?)?;
    match kind {
        KIND_MLP => {
            let input_dim = read_u32(&mut r)? as usize;
            let n_layers = read_u32(&mut r)? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let in_dim = read_u32(&mut r)? as usize;
                let out_dim = read_u32(&mut r)? as usize;
                let activation = activation_from_byte(read_u8(&mut r)?)?;
                let mut weight = vec![0.0; in_dim * out_dim];
                for v in weight.iter_mut() {
                    *v = read_f64(&mut r)?;
                }
                let mut bias = vec![0.0; out_dim];
                for v in bias.iter_mut() {
                    *v = read_f64(&mut r)?;
                }
                layers.push(LayerSpec::new(in_dim, out_dim, weight, bias, activation)?);
            }
            let mlp = MlpModel::new(layers, task, input_dim)?;
            Ok(Model::Mlp(mlp))
        }
        KIND_FOREST => {
            let input_dim = read_u32(&mut r)? as usize;
            let n_classes = read_u32(&mut r)? as usize;
            let seed = read_u64(&mut r)?;
            let n_trees = read_u32(&mut r)? as usize;
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let n_nodes = read_u32(&mut r)? as usize;
                let mut nodes = Vec::with_capacity(n_nodes);
                for _ in 0..n_nodes {
                    let tag = read_u8(&mut r)?;
                    match tag {
                        0 => {
                            let feature = read_u32(&mut r)? as usize;
                            let threshold = read_f64(&mut r)?;
                            let left = read_u32(&mut r)? as usize;
                            let right = read_u32(&mut r)? as usize;
                            nodes.push(TreeNode::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            });
                        }
                        1 => {
                            let value = match task {
                                Task::Classification => {
                                    let k = read_u32(&mut r)? as usize;
                                    let mut counts = vec![0.0; k];
                                    for c in counts.iter_mut() {
                                        *c = read_f64(&mut r)?;
                                    }
                                    LeafValue::ClassCounts(counts)
                                }
                                Task::Regression => LeafValue::Mean(read_f64(&mut r)?),
                            };
                            nodes.push(TreeNode::Leaf { value });
                        }
                        other => {
                            return Err(ModelError::Format(format!(
                                "unknown tree node tag {}",
                                other
                            )))
                        }
                    }
                }
                trees.push(Tree { nodes });
            }
            Ok(Model::Forest(RandomForest {
                trees,
                seed,
                task,
                input_dim,
                n_classes,
            }))
        }
        other => Err(ModelError::Format(format!("unknown model kind {}", other))),
    }
}
