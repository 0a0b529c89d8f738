import { ApiClient } from "./api.js";
import { BatchFlow } from "./batch.js";
import { renderInstructions } from "./instructions.js";
import { QualificationFlow } from "./qualification.js";

async function boot(): Promise<void> {
  const api = new ApiClient("");
  await api.createSession();

  const instructionsRoot = document.getElementById("instructions")!;
  const qualificationRoot = document.getElementById("qualification")!;
  const batchRoot = document.getElementById("batch")!;

  await renderInstructions(api, instructionsRoot);

  const batchFlow = new BatchFlow(api, batchRoot);
  const qualification = new QualificationFlow(api, qualificationRoot, {
    onQualified: () => {
      qualificationRoot.hidden = true;
      batchRoot.hidden = false;
      void batchFlow.start();
    },
  });

  batchRoot.hidden = true;
  await qualification.start();
}

if (typeof window !== "undefined" && document.getElementById("instructions")) {
  window.addEventListener("load", () => void boot());
}
