import { ApiClient } from "./api.js";
import { JobMonitor } from "./jobs.js";
import { AnnotationSession } from "./session.js";
import { buildUi, CanvasPngCodec } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const api = new ApiClient("");
const session = new AnnotationSession(api, new CanvasPngCodec());
const monitor = new JobMonitor(api);
buildUi(root, api, session, monitor);
