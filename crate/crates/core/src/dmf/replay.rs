use std::collections::HashMap;

use crate::protocol::{ProtocolStep, SampleId};

use super::{Device, DeviceConfig, DeviceError, DropletId};

/// Replays a protocol log on a fresh device. Steps on the implicit vessel
/// are skipped; consecutive equilibrations of distinct samples run in
/// parallel.
pub fn compile_protocol(config: &DeviceConfig, steps: &[ProtocolStep]) -> Result<Device, DeviceError> {
    let mut dev = Device::new(config.clone())?;
    let mut vessel: Option<SampleId> = None;
    let mut droplet_of: HashMap<SampleId, DropletId> = HashMap::new();
    let lookup = |map: &HashMap<SampleId, DropletId>, s: SampleId, vessel: Option<SampleId>, op| {
        if Some(s) == vessel {
            return Err(DeviceError::VesselOffDevice { op });
        }
        map.get(&s).copied().ok_or(DeviceError::UnknownSample(s))
    };
    let mut i = 0;
    while i < steps.len() {
        let step = &steps[i];
        let at = |e: DeviceError| DeviceError::AtStep { step: i, op: step.name(), source: Box::new(e) };
        match step {
            ProtocolStep::NewSample { vessel: true, sample, .. } => vessel = Some(*sample),
            ProtocolStep::NewSample { sample, volume_ul, .. } => {
                let d = dev.inject(Some(*sample), *volume_ul).map_err(at)?;
                droplet_of.insert(*sample, d);
            }
            ProtocolStep::Mix { inputs, output, .. } => {
                let a = lookup(&droplet_of, inputs[0], vessel, "mix").map_err(at)?;
                let b = lookup(&droplet_of, inputs[1], vessel, "mix").map_err(at)?;
                let d = dev.merge_droplets(a, b, Some(*output)).map_err(at)?;
                droplet_of.insert(*output, d);
            }
            ProtocolStep::Split { input, outputs, proportion, .. } => {
                let d = lookup(&droplet_of, *input, vessel, "split").map_err(at)?;
                let (x, y) = dev.split_droplet(d, *proportion, [Some(outputs[0]), Some(outputs[1])]).map_err(at)?;
                droplet_of.insert(outputs[0], x);
                droplet_of.insert(outputs[1], y);
            }
            ProtocolStep::Dispose { input } => {
                let d = lookup(&droplet_of, *input, vessel, "dispose").map_err(at)?;
                dev.dispose(d).map_err(at)?;
            }
            ProtocolStep::Equilibrate { .. } => {
                let mut jobs = Vec::new();
                let mut j = i;
                while let Some(ProtocolStep::Equilibrate { sample, duration, temperature_k }) = steps.get(j) {
                    if Some(*sample) != vessel && *duration > 0.0 {
                        let d = lookup(&droplet_of, *sample, vessel, "equilibrate")
                            .map_err(|e| DeviceError::AtStep { step: j, op: "equilibrate", source: Box::new(e) })?;
                        if jobs.iter().any(|(x, _, _)| *x == d) {
                            break;
                        }
                        jobs.push((d, *temperature_k, *duration));
                    }
                    j += 1;
                }
                if !jobs.is_empty() {
                    dev.thermal_park_many(&jobs).map_err(at)?;
                }
                i = j;
                continue;
            }
        }
        i += 1;
    }
    Ok(dev)
}
