/**
 * App bootstrap. `?rater=<id>` opens the survey flow for that rater;
 * anything else opens the designer console.
 */

import { ApiClient } from "./api.js";
import { DesignerSession } from "./designer.js";
import { RaterSession } from "./rater.js";
import { renderDesigner, renderRater } from "./views.js";

export function start(root: HTMLElement, location: Location): void {
  const api = new ApiClient("");
  const raterId = new URLSearchParams(location.search).get("rater");
  if (raterId) {
    const session = new RaterSession(api, raterId);
    renderRater(root, session, api);
    session
      .load()
      .then(() => renderRater(root, session, api))
      .catch((error) => {
        root.replaceChildren();
        const p = root.ownerDocument.createElement("p");
        p.className = "status error";
        p.textContent = `Cannot start session: ${error.message}`;
        root.append(p);
      });
  } else {
    renderDesigner(root, new DesignerSession(api));
  }
}

const root = document.getElementById("app");
if (root) start(root, window.location);
