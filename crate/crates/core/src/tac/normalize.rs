use std::collections::{BTreeMap, BTreeSet};

use super::ir::{Operand, TacBlock, TacFunction, TacInstruction, TacOp};

/// Parameter names (`p<block>_<slot>`) keep their names through renaming.
pub fn is_param_name(name: &str) -> bool {
    let Some(rest) = name.strip_prefix('p') else {
        return false;
    };
    let Some((block, slot)) = rest.split_once('_') else {
        return false;
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    digits(block) && digits(slot)
}

/// Blocks reachable from the entry in reverse post-order. Labels that do not
/// name a block (truncated functions) are skipped.
fn rpo_labels(f: &TacFunction) -> Vec<String> {
    let index: BTreeMap<&str, usize> = f
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.label.as_str(), i))
        .collect();
    let Some(&entry) = index.get(f.entry_label.as_str()) else {
        return Vec::new();
    };
    let succs = |i: usize| -> Vec<usize> {
        let mut out = Vec::new();
        for ins in &f.blocks[i].instrs {
            for t in ins.targets() {
                if let Some(&j) = index.get(t) {
                    if !out.contains(&j) {
                        out.push(j);
                    }
                }
            }
        }
        out
    };
    let mut seen = BTreeSet::from([entry]);
    let mut post = Vec::new();
    let mut stack = vec![(entry, succs(entry))];
    while let Some((node, pending)) = stack.last_mut() {
        if pending.is_empty() {
            post.push(*node);
            stack.pop();
            continue;
        }
        let next = pending.remove(0);
        if seen.insert(next) {
            let s = succs(next);
            stack.push((next, s));
        }
    }
    post.iter().rev().map(|&i| f.blocks[i].label.clone()).collect()
}

fn reorder(f: &TacFunction) -> Vec<TacBlock> {
    let order = rpo_labels(f);
    let kept: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    order
        .iter()
        .map(|label| {
            let mut block = f.block(label).expect("label from rpo").clone();
            for ins in &mut block.instrs {
                if ins.op == TacOp::Phi {
                    // Drop incoming values from blocks that are gone.
                    let pairs: Vec<Operand> = ins
                        .args
                        .chunks(2)
                        .filter(|p| p[0].as_label().is_none_or(|l| kept.contains(l)))
                        .flatten()
                        .cloned()
                        .collect();
                    ins.args = pairs;
                }
            }
            block
        })
        .collect()
}

fn definitions(blocks: &[TacBlock]) -> BTreeMap<String, usize> {
    let mut defs = BTreeMap::new();
    for ins in blocks.iter().flat_map(|b| &b.instrs) {
        if let Some(d) = &ins.dest {
            *defs.entry(d.clone()).or_insert(0) += 1;
        }
    }
    defs
}

/// The single value a copy or a trivial phi forwards, if any.
fn forwarded(ins: &TacInstruction) -> Option<&Operand> {
    let dest = ins.dest.as_deref()?;
    match ins.op {
        TacOp::Copy => ins.args.first().filter(|a| a.as_var() != Some(dest)),
        TacOp::Phi => {
            let mut values = ins
                .phi_pairs()
                .map(|(_, v)| v)
                .filter(|v| v.as_var() != Some(dest));
            let first = values.next()?;
            values.all(|v| v == first).then_some(first)
        }
        _ => None,
    }
}

/// Replaces single-definition copies (and phis whose incoming values all
/// agree) by their source. Returns true if anything changed.
fn propagate_copies(blocks: &mut [TacBlock]) -> bool {
    let defs = definitions(blocks);
    let mut subst: BTreeMap<String, Operand> = BTreeMap::new();
    for ins in blocks.iter().flat_map(|b| &b.instrs) {
        if let (Some(d), Some(src)) = (&ins.dest, forwarded(ins)) {
            if defs.get(d) == Some(&1) {
                subst.insert(d.clone(), src.clone());
            }
        }
    }
    // Resolve chains; entries that close a cycle are left alone.
    let mut resolved: BTreeMap<String, Operand> = BTreeMap::new();
    for name in subst.keys() {
        let mut seen = BTreeSet::from([name.as_str()]);
        let mut cur = &subst[name];
        let mut cyclic = false;
        while let Some(v) = cur.as_var().filter(|v| subst.contains_key(*v)) {
            if !seen.insert(v) {
                cyclic = true;
                break;
            }
            cur = &subst[v];
        }
        if !cyclic && cur.as_var() != Some(name.as_str()) {
            resolved.insert(name.clone(), cur.clone());
        }
    }
    if resolved.is_empty() {
        return false;
    }
    for block in blocks.iter_mut() {
        block.instrs.retain(|ins| {
            !ins.dest
                .as_ref()
                .is_some_and(|d| resolved.contains_key(d) && forwarded(ins).is_some())
        });
        for ins in &mut block.instrs {
            for a in &mut ins.args {
                if let Some(r) = a.as_var().and_then(|v| resolved.get(v)) {
                    *a = r.clone();
                }
            }
        }
    }
    true
}

/// Removes side-effect-free assignments whose destination is never read.
fn remove_dead(blocks: &mut [TacBlock]) -> bool {
    let mut changed = false;
    loop {
        let mut uses: BTreeMap<&str, usize> = BTreeMap::new();
        for ins in blocks.iter().flat_map(|b| &b.instrs) {
            for u in ins.uses() {
                if ins.dest.as_deref() != Some(u) {
                    *uses.entry(u).or_insert(0) += 1;
                }
            }
        }
        let dead: BTreeSet<String> = blocks
            .iter()
            .flat_map(|b| &b.instrs)
            .filter(|ins| ins.op.is_pure_value())
            .filter_map(|ins| ins.dest.as_ref())
            .filter(|d| !uses.contains_key(d.as_str()))
            .cloned()
            .collect();
        if dead.is_empty() {
            return changed;
        }
        for block in blocks.iter_mut() {
            block
                .instrs
                .retain(|ins| !(ins.op.is_pure_value() && ins.dest.as_ref().is_some_and(|d| dead.contains(d))));
        }
        changed = true;
    }
}

fn rename(blocks: &mut [TacBlock]) {
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let assign = |name: &str, names: &mut BTreeMap<String, String>| {
        if !is_param_name(name) && !names.contains_key(name) {
            let fresh = format!("v{}", names.len());
            names.insert(name.to_string(), fresh);
        }
    };
    for ins in blocks.iter().flat_map(|b| &b.instrs) {
        for u in ins.uses() {
            assign(u, &mut names);
        }
        if let Some(d) = &ins.dest {
            assign(d, &mut names);
        }
    }
    for ins in blocks.iter_mut().flat_map(|b| &mut b.instrs) {
        for a in &mut ins.args {
            if let Operand::Var(v) = a {
                if let Some(n) = names.get(v.as_str()) {
                    *v = n.clone();
                }
            }
        }
        if let Some(d) = &mut ins.dest {
            if let Some(n) = names.get(d.as_str()) {
                *d = n.clone();
            }
        }
    }
}

/// Canonical form: reverse post-order blocks, no copies or dead values,
/// temporaries renamed `v0, v1, ...` in order of first appearance.
pub fn normalize(f: &TacFunction) -> TacFunction {
    let mut blocks = reorder(f);
    loop {
        let copied = propagate_copies(&mut blocks);
        let removed = remove_dead(&mut blocks);
        if !copied && !removed {
            break;
        }
    }
    rename(&mut blocks);
    for b in &mut blocks {
        b.refresh_successors();
    }
    TacFunction {
        selector: f.selector,
        signature: f.signature.clone(),
        visibility: f.visibility,
        blocks,
        entry_label: f.entry_label.clone(),
    }
}
