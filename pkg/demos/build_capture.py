"""Generate the default scenario and write it out as pcap and CSV.

Three devices (a camera, a smart plug, an air quality monitor) run their
normal routines for ten minutes while each one is hijacked for three
flood episodes. The capture, a label sidecar and a schedule summary all
land in ./out.
"""

import collections
import pathlib

from iotdetect.capture import write_capture, write_label_sidecar
from iotdetect.simulate import default_scenario_config, overlay_scenario

out = pathlib.Path("out")
out.mkdir(exist_ok=True)

config = default_scenario_config(seed=42)
result = overlay_scenario(config)

print(f"simulated {len(result.records)} packets over {config.capture_length:.0f}s")
mix = collections.Counter(p.label.value for p in result.records)
for label, n in sorted(mix.items()):
    print(f"  {label:<7} {n:>8}  ({n / len(result.records):.1%})")

print("\nattack schedule:")
for s in sorted(result.schedule, key=lambda s: (s.device_ip, s.start)):
    print(f"  {s.device_ip}  {s.kind.value:<15} {s.start:7.1f}s .. {s.end:7.1f}s")

write_capture(result.records, str(out / "capture.pcap"))
write_label_sidecar(result.records, str(out / "capture.pcap.labels.csv"))
write_capture(result.records, str(out / "capture.csv"))
print(f"\nwrote {out / 'capture.pcap'} (+ label sidecar) and {out / 'capture.csv'}")
