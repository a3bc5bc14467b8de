// Application shell: keyfile login, role-appropriate tabs, shared banner.
// The app holds no protocol state of its own; every view re-reads from the
// service, so a refresh (or a second tab) always converges.

import { ApiClient, type FeeSchedule, type Session } from "./api.js";
import { hexToBytes } from "./crypto.js";
import { clear, h } from "./dom.js";
import type { Ctx } from "./context.js";
import { staffView } from "./staff.js";
import { adminView } from "./admin.js";
import { verifyView } from "./verify.js";

export interface AppOptions {
  apiBase: string;
  fetchImpl?: (input: string, init?: RequestInit) => Promise<Response>;
}

const ROLE_LABELS: Record<number, string> = {
  0: "system admin",
  1: "COAAT admin",
  2: "staff",
  3: "read-only",
};

export function mountApp(root: HTMLElement, opts: AppOptions): void {
  const api = new ApiClient(opts.apiBase, opts.fetchImpl);
  const flashEl = h("div", { class: "flash", role: "status" });

  const flash = (message: string, kind: "info" | "error" = "info") => {
    flashEl.textContent = message;
    flashEl.setAttribute("data-kind", kind);
  };

  clear(root);
  root.append(h("h1", {}, "COAAT dossier chain"), flashEl, loginForm());

  function loginForm(): HTMLElement {
    const addressInput = h("input", {
      class: "login-address",
      placeholder: "address (0x + 40 hex chars)",
    }) as HTMLInputElement;
    const keyInput = h("input", {
      class: "login-key",
      type: "password",
      placeholder: "signing key (64 hex chars, from your keyfile)",
    }) as HTMLInputElement;

    const doLogin = async () => {
      try {
        const key = hexToBytes(keyInput.value);
        const session = await api.login(addressInput.value.trim(), key);
        let schedule: FeeSchedule | null = null;
        try {
          schedule = await api.feeSchedule();
        } catch {
          // fee hints are cosmetic; the shell works without them
        }
        showShell({ api, session, key, schedule, flash });
      } catch (err) {
        flash(err instanceof Error ? err.message : String(err), "error");
      }
    };

    return h(
      "form",
      {
        class: "login-form",
        onSubmit: (e: Event) => {
          e.preventDefault();
          doLogin();
        },
      },
      h("h2", {}, "Log in"),
      addressInput,
      keyInput,
      h(
        "button",
        {
          class: "login-btn",
          type: "button",
          onClick: () => {
            doLogin();
          },
        },
        "Log in",
      ),
    );
  }

  function showShell(ctx: Ctx): void {
    const tabs = tabsFor(ctx.session);
    const viewHost = h("div", { class: "view-host" });
    const nav = h("nav", { class: "tabs" });

    const activate = (name: string) => {
      const tab = tabs.find((t) => t.name === name);
      if (!tab) return;
      clear(viewHost);
      viewHost.append(tab.build(ctx));
      for (const btn of Array.from(nav.children)) {
        btn.setAttribute("data-active", btn.getAttribute("data-tab") === name ? "yes" : "no");
      }
    };

    for (const tab of tabs) {
      nav.append(
        h(
          "button",
          { class: "tab-btn", "data-tab": tab.name, onClick: () => activate(tab.name) },
          tab.title,
        ),
      );
    }

    const role = ctx.session.role;
    const who = h(
      "p",
      { class: "whoami" },
      `${ctx.session.name ?? "unnamed"} (${ctx.session.address}), ` +
        `${role === null ? "unregistered" : ROLE_LABELS[role] ?? `role ${role}`}`,
      h(
        "button",
        {
          class: "logout-btn",
          onClick: () => {
            ctx.api.logout();
            mountApp(root, opts);
          },
        },
        "Log out",
      ),
    );

    clear(root);
    root.append(h("h1", {}, "COAAT dossier chain"), flashEl, who, nav, viewHost);
    const first = tabs[0];
    if (first) activate(first.name);
  }
}

interface Tab {
  name: string;
  title: string;
  build: (ctx: Ctx) => HTMLElement;
}

/** Unauthorized views are simply absent: staff never see the queue, the
 * read-only role sees verification only. */
function tabsFor(session: Session): Tab[] {
  const verify: Tab = { name: "verify", title: "Verify", build: verifyView };
  if (session.role === 2) {
    return [{ name: "dossiers", title: "Dossiers", build: staffView }, verify];
  }
  if (session.role === 1) {
    return [{ name: "queue", title: "Validation queue", build: adminView }, verify];
  }
  return [verify];
}
