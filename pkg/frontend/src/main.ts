import { ApiClient } from "./api.js";
import { AnnotationApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const sessionId = params.get("session");
const runId = params.get("run");
const root = document.getElementById("app");

if (!root) {
  throw new Error("missing #app mount point");
}
if (!sessionId) {
  root.textContent = "Add ?session=<session id> (and optionally &run=<run id>) to the URL.";
} else {
  const app = new AnnotationApp(root, new ApiClient(""), sessionId, runId);
  void app.start();
}
