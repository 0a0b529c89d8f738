import { ApiClient } from "./api.js";

// Instruction copy comes from the service so the text shown to annotators
// and the text the service was configured with can never drift apart.
export async function renderInstructions(api: ApiClient, root: HTMLElement): Promise<void> {
  const doc = await api.getInstructions();
  root.innerHTML = "";

  const heading = document.createElement("h2");
  heading.textContent = "How to click";
  root.appendChild(heading);

  const rules: [string, string][] = [
    ["Where is the center?", doc.center_definition],
    ["Truncated objects", doc.truncation_rule],
    ["Multiple objects", doc.multi_instance_rule],
  ];
  for (const [title, text] of rules) {
    const section = document.createElement("section");
    section.className = "rule";
    const h = document.createElement("h3");
    h.textContent = title;
    const p = document.createElement("p");
    p.textContent = text;
    section.appendChild(h);
    section.appendChild(p);
    root.appendChild(section);
  }

  const pacing = document.createElement("p");
  pacing.className = "pacing";
  pacing.textContent =
    `Aim to spend about ${doc.pacing_seconds_per_click} seconds per click. ` +
    "Speed matters, but accuracy matters more.";
  root.appendChild(pacing);
}
